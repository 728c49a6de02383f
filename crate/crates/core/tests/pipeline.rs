use tcl_rl::agent::QTable;
use tcl_rl::control::ReferenceProfile;
use tcl_rl::discretization::{BinningStrategy, HistoricalDataset};
use tcl_rl::experiment::{
    constant_sweep, evaluate_greedy, generalization_run, harvest_learning_apl, mse, run_episode,
    test_seeds, train, ExperimentConfig, Policy, DEFAULT_SWEEP_KS,
};

fn small(stochastic: bool) -> ExperimentConfig {
    ExperimentConfig {
        stochastic,
        horizon: 60.0,
        n_train_episodes: 8,
        n_test_episodes: 4,
        n_repeats: 2,
        smoothing_window: 4,
        sweep_samples: 6,
        ..ExperimentConfig::default()
    }
}

#[test]
fn episode_bookkeeping() {
    for (start, horizon, step) in [(0.0, 200.0, 1.0), (175.0, 50.0, 1.0), (0.0, 30.0, 2.0)] {
        let cfg = ExperimentConfig { start_time: start, horizon, control_step: step, ..small(true) };
        for policy in [Policy::Baseline, Policy::Fixed(3.0)] {
            let rec = run_episode(policy, &cfg, 5).unwrap();
            assert_eq!(rec.len(), (horizon / step) as usize);
            assert_eq!(rec.times[0], start);
            assert!((mse(&rec.apl, &rec.rpl).unwrap() - rec.mse).abs() < 1e-12);
        }
    }
}

#[test]
fn training_is_reproducible() {
    let cfg = small(true);
    let a = train(&cfg).unwrap();
    let b = train(&cfg).unwrap();
    assert_eq!(a, b);
    let other = train(&ExperimentConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a.pooled_test_mse(), other.pooled_test_mse());
}

#[test]
fn saved_table_replays_test_episodes() {
    let cfg = small(true);
    let summary = train(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.txt");
    summary.repeats[1].q.save(&path).unwrap();
    let q = QTable::load(&path).unwrap();
    assert_eq!(q, summary.repeats[1].q);
    let encoder = cfg.encoder().unwrap();
    let replay = evaluate_greedy(&q, &cfg, &encoder, &test_seeds(cfg.seed, 1, cfg.n_test_episodes)).unwrap();
    assert_eq!(replay, summary.repeats[1].test_mse);
}

#[test]
fn best_constant_gain_beats_baseline() {
    for stochastic in [false, true] {
        let cfg = ExperimentConfig { horizon: 200.0, ..small(stochastic) };
        let sweep = constant_sweep(&DEFAULT_SWEEP_KS, &cfg).unwrap();
        assert!(sweep.best().summary.median < sweep.baseline.summary.median);
        assert_eq!(sweep.rows.len(), DEFAULT_SWEEP_KS.len());
    }
}

#[test]
fn historical_data_feeds_data_driven_binning() {
    let cfg = small(true);
    let sweep = constant_sweep(&[1.0, 2.0], &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hd.txt");
    std::fs::write(&path, sweep.historical().to_text()).unwrap();
    let data = HistoricalDataset::load(&path).unwrap();
    assert_eq!(data, sweep.historical());

    let early = harvest_learning_apl(&cfg, 2).unwrap();
    assert_eq!(early.samples.len(), 2 * cfg.n_steps());

    for binning in [
        BinningStrategy::FreedmanDiaconis { data: data.clone() },
        BinningStrategy::Quantile { data: early, n_bins: 10 },
    ] {
        let cfg = ExperimentConfig { binning, ..small(true) };
        let t = train(&cfg).unwrap();
        assert_eq!(t.repeats[0].q.n_states(), cfg.encoder().unwrap().n_states());
    }
}

#[test]
fn step_profile_adds_reference_axis() {
    let cfg = ExperimentConfig {
        profile: ReferenceProfile::step(1.4, 1.1, 30.0).unwrap(),
        binning: BinningStrategy::RplEdge { lo: 0.9, hi: 1.7, n_bins: 10 },
        ..small(true)
    };
    let encoder = cfg.encoder().unwrap();
    assert_eq!(encoder.n_states(), 20);
    let t = train(&cfg).unwrap();
    assert_eq!(t.repeats[0].q.n_states(), 20);
    let rec = run_episode(Policy::Fixed(1.0), &cfg, 3).unwrap();
    assert_eq!(rec.rpl[29], 1.4);
    assert_eq!(rec.rpl[30], 1.1);
}

#[test]
fn generalization_with_equal_windows_is_plain_training() {
    let cfg = ExperimentConfig { test_horizon: Some(60.0), ..small(true) };
    let g = generalization_run(&cfg, &[1.0, 4.0]).unwrap();
    let plain = train(&ExperimentConfig { test_horizon: None, ..cfg.clone() }).unwrap();
    assert_eq!(g.training.pooled_test_mse(), plain.pooled_test_mse());

    let longer = ExperimentConfig { test_horizon: Some(120.0), ..cfg };
    let g2 = generalization_run(&longer, &[1.0, 4.0]).unwrap();
    assert_eq!(g2.constant_test_window.len(), 8);
    assert_ne!(g2.constant_test_window, g.constant_test_window);
    assert!(generalization_run(&ExperimentConfig { test_horizon: Some(30.0), ..small(true) }, &[1.0]).is_err());
    assert!(generalization_run(&small(true), &[1.0]).is_err());
}

#[test]
fn untrained_table_acts_as_smallest_gain() {
    let cfg = small(true);
    let encoder = cfg.encoder().unwrap();
    let q = QTable::new(encoder.n_states(), cfg.agent.actions.len()).unwrap();
    let greedy = run_episode(Policy::Greedy { q: &q, encoder: &encoder, actions: &cfg.agent.actions }, &cfg, 9).unwrap();
    assert!(greedy.actions.iter().all(|&k| k == 0.1));
    assert_eq!(greedy, run_episode(Policy::Fixed(0.1), &cfg, 9).unwrap());
}
