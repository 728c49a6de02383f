use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::stats::{average_curves, smooth_curve, summarize, Summary};
use super::{
    exploration_stream, run_episode, sweep_seeds, test_seeds, train_seed_stream, ExperimentConfig,
    Policy,
};
use crate::agent::QTable;
use crate::discretization::{HistoricalDataset, Provenance, StateEncoder};
use crate::error::{invalid, Result};

/// Candidate gains of a default constant-control sweep.
pub const DEFAULT_SWEEP_KS: [f64; 8] = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];

/// Results for one constant policy. `k == None` is the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantResult {
    pub k: Option<f64>,
    pub mses: Vec<f64>,
    pub summary: Summary,
    /// APL observed over all episodes of this policy, in episode order.
    #[serde(skip)]
    pub apl: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub baseline: ConstantResult,
    pub rows: Vec<ConstantResult>,
    /// Index into `rows` of the smallest median MSE (lowest k on ties).
    pub best: usize,
}

impl SweepSummary {
    pub fn best(&self) -> &ConstantResult {
        &self.rows[self.best]
    }

    /// APL trajectories of the best constant policy, usable as historical data.
    pub fn historical(&self) -> HistoricalDataset {
        HistoricalDataset::new(self.best().apl.clone(), Provenance::ConstantSweep)
    }
}

fn evaluate_constant(k: Option<f64>, config: &ExperimentConfig, seeds: &[u64]) -> Result<ConstantResult> {
    let mut mses = Vec::with_capacity(seeds.len());
    let mut apl = Vec::new();
    for &seed in seeds {
        let policy = match k {
            None => Policy::Baseline,
            Some(k) => Policy::Fixed(k),
        };
        let rec = run_episode(policy, config, seed)?;
        mses.push(rec.mse);
        apl.extend(rec.apl);
    }
    Ok(ConstantResult { k, summary: summarize(&mses)?, mses, apl })
}

/// Seeds for a constant sweep: one episode when deterministic, otherwise
/// `sweep_samples` shared across every k.
pub fn sweep_episode_seeds(config: &ExperimentConfig) -> Vec<u64> {
    if config.stochastic {
        sweep_seeds(config.seed, config.sweep_samples.max(1))
    } else {
        vec![config.seed]
    }
}

/// Evaluates the baseline and each constant gain on the same episode seeds.
pub fn constant_sweep(ks: &[f64], config: &ExperimentConfig) -> Result<SweepSummary> {
    config.validate()?;
    if ks.is_empty() {
        return Err(invalid("constant sweep needs at least one k"));
    }
    if ks.iter().any(|k| !(*k >= 0.0)) {
        return Err(invalid("sweep gains must be non-negative"));
    }
    let seeds = sweep_episode_seeds(config);
    let baseline = evaluate_constant(None, config, &seeds)?;
    let rows = std::thread::scope(|scope| {
        let handles: Vec<_> = ks
            .iter()
            .map(|&k| {
                let seeds = &seeds;
                scope.spawn(move || evaluate_constant(Some(k), config, seeds))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect::<Result<Vec<_>>>()
    })?;
    let mut best = 0;
    for (i, row) in rows.iter().enumerate() {
        if row.summary.median < rows[best].summary.median {
            best = i;
        }
    }
    Ok(SweepSummary { baseline, rows, best })
}

/// Outcome of one training repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub q: QTable,
    /// MSE of each (exploring) training episode.
    pub train_mse: Vec<f64>,
    pub smoothed: Vec<f64>,
    /// Greedy-policy MSE on the test episodes.
    pub test_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub repeats: Vec<RepeatResult>,
    /// Smoothed training curves averaged over repeats.
    pub curve: Vec<f64>,
    pub test: Summary,
}

impl TrainingSummary {
    pub fn pooled_test_mse(&self) -> Vec<f64> {
        self.repeats.iter().flat_map(|r| r.test_mse.iter().copied()).collect()
    }
}

/// Trains a fresh Q-table for repeat `repeat`; returns it with the per-episode
/// training MSEs.
pub fn train_repeat(
    config: &ExperimentConfig,
    encoder: &StateEncoder,
    repeat: usize,
) -> Result<(QTable, Vec<f64>)> {
    let agent = &config.agent;
    let mut q = QTable::new(encoder.n_states(), agent.actions.len())?;
    let mut seeds = train_seed_stream(config.seed, repeat);
    let mut explore = exploration_stream(config.seed, repeat);
    let mut mses = Vec::with_capacity(config.n_train_episodes);
    for episode in 0..config.n_train_episodes {
        let policy = Policy::Learning {
            q: &mut q,
            encoder,
            agent,
            eps: agent.exploration_at(episode),
            rng: &mut explore,
        };
        let rec = run_episode(policy, config, seeds.next_u64())?;
        mses.push(rec.mse);
    }
    Ok((q, mses))
}

/// Greedy evaluation of a table on the given feeder seeds, over the config's
/// recorded window.
pub fn evaluate_greedy(
    q: &QTable,
    config: &ExperimentConfig,
    encoder: &StateEncoder,
    seeds: &[u64],
) -> Result<Vec<f64>> {
    if q.n_states() != encoder.n_states() || q.n_actions() != config.agent.actions.len() {
        return Err(invalid(format!(
            "Q-table is {}x{} but the configuration expects {}x{}",
            q.n_states(),
            q.n_actions(),
            encoder.n_states(),
            config.agent.actions.len()
        )));
    }
    seeds
        .iter()
        .map(|&seed| {
            let policy = Policy::Greedy { q, encoder, actions: &config.agent.actions };
            run_episode(policy, config, seed).map(|r| r.mse)
        })
        .collect()
}

fn run_repeat(config: &ExperimentConfig, encoder: &StateEncoder, repeat: usize) -> Result<RepeatResult> {
    let (q, train_mse) = train_repeat(config, encoder, repeat)?;
    let smoothed = smooth_curve(&train_mse, config.smoothing_window)?;
    let seeds = test_seeds(config.seed, repeat, config.n_test_episodes);
    let test_mse = evaluate_greedy(&q, &config.test_window(), encoder, &seeds)?;
    Ok(RepeatResult { q, train_mse, smoothed, test_mse })
}

/// Independent training repeats, each followed by greedy testing. Repeats
/// run on separate threads; results are ordered by repeat index.
pub fn train(config: &ExperimentConfig) -> Result<TrainingSummary> {
    config.validate()?;
    if config.n_repeats == 0 || config.n_test_episodes == 0 {
        return Err(invalid("training needs at least one repeat and one test episode"));
    }
    let encoder = config.encoder()?;
    let repeats = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.n_repeats)
            .map(|r| {
                let encoder = &encoder;
                scope.spawn(move || run_repeat(config, encoder, r))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training worker panicked")).collect::<Result<Vec<_>>>()
    })?;
    let curves: Vec<Vec<f64>> = repeats.iter().map(|r| r.smoothed.clone()).collect();
    let pooled: Vec<f64> = repeats.iter().flat_map(|r| r.test_mse.iter().copied()).collect();
    Ok(TrainingSummary { curve: average_curves(&curves), test: summarize(&pooled)?, repeats })
}

/// APL seen during the first `n_episodes` exploring episodes of repeat 0.
pub fn harvest_learning_apl(config: &ExperimentConfig, n_episodes: usize) -> Result<HistoricalDataset> {
    config.validate()?;
    let encoder = config.encoder()?;
    let agent = &config.agent;
    let mut q = QTable::new(encoder.n_states(), agent.actions.len())?;
    let mut seeds = train_seed_stream(config.seed, 0);
    let mut explore = exploration_stream(config.seed, 0);
    let mut apl = Vec::new();
    for episode in 0..n_episodes {
        let policy = Policy::Learning {
            q: &mut q,
            encoder: &encoder,
            agent,
            eps: agent.exploration_at(episode),
            rng: &mut explore,
        };
        apl.extend(run_episode(policy, config, seeds.next_u64())?.apl);
    }
    Ok(HistoricalDataset::new(apl, Provenance::EarlyQl))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationSummary {
    pub training: TrainingSummary,
    /// Best constant gain on the training window.
    pub constant_k: f64,
    /// That gain's MSEs on the training window (sweep seeds).
    pub constant_train_window: Vec<f64>,
    /// That gain's MSEs on the test window, same seeds as the RL tests.
    pub constant_test_window: Vec<f64>,
    pub rl_test: Summary,
    pub constant_test: Summary,
}

/// Trains on `[start, start + horizon]`, then compares the greedy policy with
/// the training-window-optimal constant gain on `[start, start + test_horizon]`.
pub fn generalization_run(config: &ExperimentConfig, ks: &[f64]) -> Result<GeneralizationSummary> {
    let Some(test_horizon) = config.test_horizon else {
        return Err(invalid("generalization run needs a test horizon"));
    };
    if !(test_horizon >= config.horizon) {
        return Err(invalid("test horizon must not be shorter than the training horizon"));
    }
    let sweep = constant_sweep(ks, config)?;
    let best = sweep.best();
    let constant_k = best.k.expect("sweep rows carry a gain");
    let training = train(config)?;

    let test_cfg = config.test_window();
    let mut constant_test_window = Vec::new();
    for r in 0..config.n_repeats {
        for seed in test_seeds(config.seed, r, config.n_test_episodes) {
            constant_test_window.push(run_episode(Policy::Fixed(constant_k), &test_cfg, seed)?.mse);
        }
    }
    Ok(GeneralizationSummary {
        rl_test: training.test,
        constant_test: summarize(&constant_test_window)?,
        constant_k,
        constant_train_window: best.mses.clone(),
        constant_test_window,
        training,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(stochastic: bool) -> ExperimentConfig {
        ExperimentConfig {
            stochastic,
            horizon: 40.0,
            n_train_episodes: 6,
            n_test_episodes: 3,
            n_repeats: 2,
            smoothing_window: 3,
            sweep_samples: 4,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn singleton_sweep_equals_episode() {
        let cfg = small(false);
        let s = constant_sweep(&[2.0], &cfg).unwrap();
        assert_eq!(s.rows.len(), 1);
        let rec = run_episode(Policy::Fixed(2.0), &cfg, cfg.seed).unwrap();
        assert_eq!(s.best().mses, vec![rec.mse]);
        assert_eq!(s.best().summary.median, rec.mse);
        assert_eq!(s.best().summary.std, 0.0);
        assert!(constant_sweep(&[], &cfg).is_err());
    }

    #[test]
    fn stochastic_sweep_uses_sample_count() {
        let s = constant_sweep(&[0.5, 7.0], &small(true)).unwrap();
        assert_eq!(s.baseline.mses.len(), 4);
        assert!(s.rows.iter().all(|r| r.mses.len() == 4));
        assert_eq!(s.historical().samples.len(), 4 * 40);
    }

    #[test]
    fn training_shapes_and_determinism() {
        let cfg = small(true);
        let a = train(&cfg).unwrap();
        assert_eq!(a.repeats.len(), 2);
        assert_eq!(a.curve.len(), 6);
        assert!(a.repeats.iter().all(|r| r.test_mse.len() == 3 && r.q.n_states() == 10));
        assert_eq!(a.pooled_test_mse().len(), 6);
        let b = train(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn repeats_differ_by_seed() {
        let cfg = small(true);
        let a = train(&cfg).unwrap();
        assert_ne!(a.repeats[0].train_mse, a.repeats[1].train_mse);
    }

    #[test]
    fn greedy_replay_matches_training_tests() {
        let cfg = small(true);
        let out = train(&cfg).unwrap();
        let enc = cfg.encoder().unwrap();
        let seeds = test_seeds(cfg.seed, 1, cfg.n_test_episodes);
        let replay = evaluate_greedy(&out.repeats[1].q, &cfg, &enc, &seeds).unwrap();
        assert_eq!(replay, out.repeats[1].test_mse);
    }

    #[test]
    fn greedy_rejects_mismatched_table() {
        let cfg = small(false);
        let enc = cfg.encoder().unwrap();
        let q = QTable::new(3, 5).unwrap();
        assert!(evaluate_greedy(&q, &cfg, &enc, &[0]).is_err());
    }

    #[test]
    fn generalization_with_equal_windows() {
        let cfg = ExperimentConfig { test_horizon: Some(40.0), ..small(true) };
        let g = generalization_run(&cfg, &[0.5, 7.0]).unwrap();
        let plain = train(&cfg).unwrap();
        assert_eq!(g.training, plain);
        assert_eq!(g.constant_test_window.len(), 6);
        assert!(generalization_run(&small(true), &[0.5]).is_err());
    }

    #[test]
    fn harvest_collects_requested_episodes() {
        let d = harvest_learning_apl(&small(true), 3).unwrap();
        assert_eq!(d.samples.len(), 120);
        assert_eq!(d.provenance, Provenance::EarlyQl);
    }
}
