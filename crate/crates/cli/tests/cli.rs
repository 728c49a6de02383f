use std::path::Path;
use std::process::{Command, Output};

fn tcl_rl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcl-rl")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = tcl_rl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_full_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "--k", "2", "--horizon", "30", "--out", s(&out)]);
    let (header, rows) = read_csv(&out.join("trajectory.csv"));
    assert_eq!(header.len(), 5 + 40);
    assert_eq!(&header[..5], ["time", "apl", "rpl", "voltage", "k"]);
    assert_eq!(header[5], "theta_1");
    assert_eq!(header[44], "switch_20");
    assert_eq!(rows.len(), 30);
    // Ten loads on at v = 1, 0.14 each.
    let apl0: f64 = rows[0][1].parse().unwrap();
    assert!((apl0 - 1.4).abs() < 1e-12);
    for row in &rows {
        let v: f64 = row[3].parse().unwrap();
        assert!((0.9..=1.1).contains(&v));
        assert_eq!(row[4], "2");
    }
    assert!(out.join("manifest.json").exists());
}

#[test]
fn baseline_holds_nominal_voltage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("base");
    ok(&["simulate", "--baseline", "--horizon", "20", "--out", s(&out)]);
    let (_, rows) = read_csv(&out.join("trajectory.csv"));
    assert!(rows.iter().all(|r| r[3] == "1" && r[4] == "0"));
}

#[test]
fn stochastic_simulation_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["simulate", "--k", "0.5", "--stochastic", "--seed", "7", "--out", s(out)]);
    }
    let read = |p: &Path| std::fs::read(p.join("trajectory.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(read_csv(&a.join("trajectory.csv")).1.len(), 200);
}

#[test]
fn sweep_has_baseline_and_default_gains() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    ok(&["sweep", "--horizon", "50", "--out", s(&out)]);
    let (header, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(header, ["policy", "k", "median", "mean", "std", "best"]);
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0][0], "baseline");
    assert_eq!(rows.iter().filter(|r| r[5] == "true").count(), 1);
    let hist = std::fs::read_to_string(out.join("historical_apl.txt")).unwrap();
    assert!(hist.contains("constant-sweep"));
    assert_eq!(hist.lines().filter(|l| !l.starts_with('#')).count(), 50);
}

#[test]
fn stochastic_sweep_long_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    ok(&["sweep", "--stochastic", "--samples", "4", "--ks", "1,3", "--horizon", "20", "--out", s(&out)]);
    let (_, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 3);
    let (_, long) = read_csv(&out.join("sweep_mse.csv"));
    assert_eq!(long.len(), 12);
    // Every policy sees the same feeder seeds.
    let seeds: Vec<&str> = long[..4].iter().map(|r| r[3].as_str()).collect();
    for chunk in long.chunks(4) {
        assert_eq!(chunk.iter().map(|r| r[3].as_str()).collect::<Vec<_>>(), seeds);
    }
}

const SMALL_TRAIN: [&str; 9] =
    ["--stochastic", "--horizon", "30", "--episodes", "6", "--tests", "4", "--repeats", "2"];

#[test]
fn train_outputs_and_evaluate_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("train");
    let mut args = vec!["train", "--out", s(&out), "--harvest", "2"];
    args.extend(SMALL_TRAIN);
    ok(&args);
    let (header, curve) = read_csv(&out.join("training_curve.csv"));
    assert_eq!(header, ["episode", "smoothed_mean", "mse_r0", "smoothed_r0", "mse_r1", "smoothed_r1"]);
    assert_eq!(curve.len(), 6);
    let (_, tests) = read_csv(&out.join("test_mse.csv"));
    assert_eq!(tests.len(), 8);
    assert!(out.join("qtable_r0.txt").exists() && out.join("qtable_r1.txt").exists());
    let hist = std::fs::read_to_string(out.join("historical_apl.txt")).unwrap();
    assert!(hist.contains("early-ql"));

    let ev = dir.path().join("eval");
    let q = out.join("qtable_r1.txt");
    let mut args = vec!["evaluate", "--qtable", s(&q), "--repeat", "1", "--compare-k", "2", "--out", s(&ev)];
    args.extend(SMALL_TRAIN);
    ok(&args);
    let (_, replay) = read_csv(&ev.join("test_mse.csv"));
    assert_eq!(replay.len(), 8);
    assert_eq!(&replay[..4], &tests[4..]);
    assert!(replay[4..].iter().all(|r| r[0] == "constant" && r[1] == "2"));
}

#[test]
fn historical_file_drives_binning() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep");
    ok(&["sweep", "--horizon", "100", "--ks", "1", "--out", s(&sweep)]);
    let hist = sweep.join("historical_apl.txt");
    for binning in ["fd", "quantile:8"] {
        let out = dir.path().join(binning.replace(':', "_"));
        let mut args = vec!["train", "--binning", binning, "--historical", s(&hist), "--out", s(&out)];
        args.extend(SMALL_TRAIN);
        ok(&args);
        let q = std::fs::read_to_string(out.join("qtable_r0.txt")).unwrap();
        assert!(!q.is_empty());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let mut args = vec!["train", "--seed", "11", "--out", s(out)];
        args.extend(SMALL_TRAIN);
        ok(&args);
    }
    for f in ["training_curve.csv", "test_mse.csv", "qtable_r0.txt", "qtable_r1.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "horizon = 25\nprofile = \"step:1.4,1.1,10\"\nbinning = \"rpledge:0.9,1.7,10\"\n").unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "--config", s(&cfg), "--horizon", "15", "--k", "1", "--out", s(&out)]);
    let (_, rows) = read_csv(&out.join("trajectory.csv"));
    assert_eq!(rows.len(), 15);
    assert_eq!(rows[9][2], "1.4");
    assert_eq!(rows[10][2], "1.1");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(tcl_rl(&["simulate", "--out", out]).status.code(), Some(2));
    assert_eq!(tcl_rl(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(tcl_rl(&["simulate", "--k", "1", "--horizon", "10.5", "--out", out]).status.code(), Some(2));
    assert_eq!(tcl_rl(&["simulate", "--k", "1", "--profile", "ramp:1", "--out", out]).status.code(), Some(2));
    assert_eq!(tcl_rl(&["simulate", "--k", "1", "--profile", "step:1.4,1.1,500", "--out", out]).status.code(), Some(2));

    let missing = dir.path().join("missing.txt");
    let r = tcl_rl(&["evaluate", "--qtable", s(&missing), "--out", out]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("missing.txt"));
    let r = tcl_rl(&["train", "--binning", "fd", "--out", out]);
    assert_eq!(r.status.code(), Some(3));
    let r = tcl_rl(&["train", "--binning", "fd", "--historical", s(&missing), "--out", out]);
    assert_eq!(r.status.code(), Some(3));
    let r = tcl_rl(&["simulate", "--k", "1", "--config", s(&missing), "--out", out]);
    assert_eq!(r.status.code(), Some(3));

    let bad = dir.path().join("bad_q.txt");
    std::fs::write(&bad, "0 1\n0.0\n").unwrap();
    assert_eq!(tcl_rl(&["evaluate", "--qtable", s(&bad), "--out", out]).status.code(), Some(3));
    // Well formed, wrong shape for the default 10-bin encoder.
    std::fs::write(&bad, "0 0 0 0 0\n0 0 0 0 0\n").unwrap();
    assert_eq!(tcl_rl(&["evaluate", "--qtable", s(&bad), "--out", out]).status.code(), Some(3));
}
