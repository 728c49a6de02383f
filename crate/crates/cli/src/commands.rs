use anyhow::Context;
use clap::Args;
use serde_json::json;
use tcl_rl::agent::QTable;
use tcl_rl::experiment::{
    constant_sweep, evaluate_greedy, harvest_learning_apl, run_episode, run_episode_observed,
    summarize, sweep_episode_seeds, test_seeds, train as train_all, Policy, DEFAULT_SWEEP_KS,
};
use tcl_rl::feeder::N_LOADS;

use crate::config::Common;
use crate::output::{csv_writer, opt, prepare_dir, write_manifest};
use crate::{InputError, UsageError};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Constant proportional gain.
    #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
    pub k: Option<f64>,
    /// Nominal voltage, no controller.
    #[arg(long)]
    pub baseline: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Gains to evaluate, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Also save the APL of the first N exploring episodes of repeat 0 as historical data.
    #[arg(long, value_name = "N")]
    pub harvest: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Q-table written by `train`.
    #[arg(long)]
    pub qtable: std::path::PathBuf,
    /// Repeat whose test seeds to replay.
    #[arg(long, default_value_t = 0)]
    pub repeat: usize,
    /// Also run this constant gain on the same seeds.
    #[arg(long)]
    pub compare_k: Option<f64>,
}

pub fn simulate(args: SimulateArgs, argv: &[String]) -> anyhow::Result<()> {
    let resolved = args.common.resolve("simulate")?;
    let (cfg, out) = (resolved.config, resolved.out);
    let policy = match args.k {
        Some(k) if !(k >= 0.0) => return Err(UsageError(format!("gain must be non-negative, got {k}")).into()),
        Some(k) => Policy::Fixed(k),
        None => Policy::Baseline,
    };
    let mut snapshots = Vec::with_capacity(cfg.n_steps());
    let rec = run_episode_observed(policy, &cfg, cfg.seed, |s| {
        snapshots.push(s.tcl_states.iter().map(|t| (t.theta, t.switch.as_u8())).collect::<Vec<_>>())
    })?;

    prepare_dir(&out)?;
    let mut w = csv_writer(&out.join("trajectory.csv"))?;
    let mut header = vec!["time".to_string(), "apl".into(), "rpl".into(), "voltage".into(), "k".into()];
    header.extend((1..=N_LOADS).map(|i| format!("theta_{i}")));
    header.extend((1..=N_LOADS).map(|i| format!("switch_{i}")));
    w.write_record(&header)?;
    for (i, snap) in snapshots.iter().enumerate() {
        let mut row = vec![
            rec.times[i].to_string(),
            rec.apl[i].to_string(),
            rec.rpl[i].to_string(),
            rec.voltages[i].to_string(),
            rec.actions[i].to_string(),
        ];
        row.extend(snap.iter().map(|(theta, _)| theta.to_string()));
        row.extend(snap.iter().map(|(_, sw)| sw.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    write_manifest(
        &out,
        "simulate",
        argv,
        &cfg,
        &["trajectory.csv"],
        json!({ "k": args.k, "baseline": args.k.is_none(), "mse": rec.mse }),
    )?;
    println!("mse {}", rec.mse);
    Ok(())
}

pub fn sweep(args: SweepArgs, argv: &[String]) -> anyhow::Result<()> {
    let resolved = args.common.resolve("sweep")?;
    let (cfg, out) = (resolved.config, resolved.out);
    let ks = args.ks.unwrap_or_else(|| DEFAULT_SWEEP_KS.to_vec());
    if ks.is_empty() || ks.iter().any(|k| !(*k >= 0.0)) {
        return Err(UsageError("--ks needs non-negative gains".into()).into());
    }
    let summary = constant_sweep(&ks, &cfg)?;
    let seeds = sweep_episode_seeds(&cfg);

    prepare_dir(&out)?;
    let mut w = csv_writer(&out.join("sweep.csv"))?;
    w.write_record(["policy", "k", "median", "mean", "std", "best"])?;
    let mut long = csv_writer(&out.join("sweep_mse.csv"))?;
    long.write_record(["policy", "k", "episode", "seed", "mse"])?;
    let best_k = summary.best().k;
    for row in std::iter::once(&summary.baseline).chain(&summary.rows) {
        let policy = if row.k.is_some() { "constant" } else { "baseline" };
        let s = row.summary;
        let best = row.k.is_some() && row.k == best_k;
        w.write_record([
            policy.to_string(),
            opt(row.k),
            s.median.to_string(),
            s.mean.to_string(),
            s.std.to_string(),
            best.to_string(),
        ])?;
        for (i, (mse, seed)) in row.mses.iter().zip(&seeds).enumerate() {
            long.write_record([policy.to_string(), opt(row.k), i.to_string(), seed.to_string(), mse.to_string()])?;
        }
    }
    w.flush()?;
    long.flush()?;
    let historical = out.join("historical_apl.txt");
    std::fs::write(&historical, summary.historical().to_text())
        .with_context(|| format!("cannot write {}", historical.display()))?;
    write_manifest(
        &out,
        "sweep",
        argv,
        &cfg,
        &["sweep.csv", "sweep_mse.csv", "historical_apl.txt"],
        json!({ "ks": ks, "best_k": best_k, "episode_seeds": seeds }),
    )?;
    let b = summary.best();
    println!("baseline median {} | best k {} median {}", summary.baseline.summary.median, opt(b.k), b.summary.median);
    Ok(())
}

pub fn train(args: TrainArgs, argv: &[String]) -> anyhow::Result<()> {
    let resolved = args.common.resolve("train")?;
    let (cfg, out) = (resolved.config, resolved.out);
    let summary = train_all(&cfg)?;

    prepare_dir(&out)?;
    let mut outputs = vec!["training_curve.csv".to_string(), "test_mse.csv".to_string()];
    let mut w = csv_writer(&out.join("training_curve.csv"))?;
    let mut header = vec!["episode".to_string(), "smoothed_mean".into()];
    for r in 0..summary.repeats.len() {
        header.push(format!("mse_r{r}"));
        header.push(format!("smoothed_r{r}"));
    }
    w.write_record(&header)?;
    for (ep, mean) in summary.curve.iter().enumerate() {
        let mut row = vec![ep.to_string(), mean.to_string()];
        for rep in &summary.repeats {
            row.push(rep.train_mse[ep].to_string());
            row.push(rep.smoothed[ep].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut t = csv_writer(&out.join("test_mse.csv"))?;
    t.write_record(["policy", "k", "repeat", "episode", "seed", "mse"])?;
    for (r, rep) in summary.repeats.iter().enumerate() {
        let seeds = test_seeds(cfg.seed, r, cfg.n_test_episodes);
        for (i, (mse, seed)) in rep.test_mse.iter().zip(&seeds).enumerate() {
            t.write_record(["greedy".to_string(), String::new(), r.to_string(), i.to_string(), seed.to_string(), mse.to_string()])?;
        }
        let name = format!("qtable_r{r}.txt");
        rep.q.save(out.join(&name))?;
        outputs.push(name);
    }
    t.flush()?;

    if let Some(n) = args.harvest {
        let data = harvest_learning_apl(&cfg, n)?;
        std::fs::write(out.join("historical_apl.txt"), data.to_text())?;
        outputs.push("historical_apl.txt".into());
    }
    let names: Vec<&str> = outputs.iter().map(String::as_str).collect();
    write_manifest(&out, "train", argv, &cfg, &names, json!({ "test": summary.test, "harvest": args.harvest }))?;
    println!(
        "test mse median {} mean {} std {}",
        summary.test.median, summary.test.mean, summary.test.std
    );
    Ok(())
}

pub fn evaluate(args: EvaluateArgs, argv: &[String]) -> anyhow::Result<()> {
    let resolved = args.common.resolve("evaluate")?;
    let (cfg, out) = (resolved.config, resolved.out);
    let q = QTable::load(&args.qtable)
        .map_err(|e| InputError(format!("cannot load Q-table {}: {e}", args.qtable.display())))?;
    let encoder = cfg.encoder()?;
    if q.n_states() != encoder.n_states() || q.n_actions() != cfg.agent.actions.len() {
        return Err(InputError(format!(
            "Q-table {} is {}x{}, configuration expects {}x{}",
            args.qtable.display(),
            q.n_states(),
            q.n_actions(),
            encoder.n_states(),
            cfg.agent.actions.len()
        ))
        .into());
    }
    if let Some(k) = args.compare_k {
        if !(k >= 0.0) {
            return Err(UsageError(format!("gain must be non-negative, got {k}")).into());
        }
    }
    let test_cfg = cfg.test_window();
    let seeds = test_seeds(cfg.seed, args.repeat, cfg.n_test_episodes);
    let greedy = evaluate_greedy(&q, &test_cfg, &encoder, &seeds)?;
    let constant = match args.compare_k {
        Some(k) => Some(
            seeds
                .iter()
                .map(|&s| run_episode(Policy::Fixed(k), &test_cfg, s).map(|r| r.mse))
                .collect::<tcl_rl::Result<Vec<_>>>()?,
        ),
        None => None,
    };

    prepare_dir(&out)?;
    let mut t = csv_writer(&out.join("test_mse.csv"))?;
    t.write_record(["policy", "k", "repeat", "episode", "seed", "mse"])?;
    let r = args.repeat.to_string();
    for (i, (mse, seed)) in greedy.iter().zip(&seeds).enumerate() {
        t.write_record(["greedy".to_string(), String::new(), r.clone(), i.to_string(), seed.to_string(), mse.to_string()])?;
    }
    if let Some(c) = &constant {
        for (i, (mse, seed)) in c.iter().zip(&seeds).enumerate() {
            t.write_record(["constant".to_string(), opt(args.compare_k), r.clone(), i.to_string(), seed.to_string(), mse.to_string()])?;
        }
    }
    t.flush()?;
    let g = summarize(&greedy)?;
    let c = constant.as_deref().map(summarize).transpose()?;
    write_manifest(
        &out,
        "evaluate",
        argv,
        &cfg,
        &["test_mse.csv"],
        json!({ "qtable": args.qtable, "repeat": args.repeat, "compare_k": args.compare_k, "greedy": g, "constant": c }),
    )?;
    println!("greedy median {} mean {} std {}", g.median, g.mean, g.std);
    if let Some(c) = c {
        println!("constant k {} median {} mean {} std {}", opt(args.compare_k), c.median, c.mean, c.std);
    }
    Ok(())
}
