//! Episode rollout and the training/testing protocol built on top of it.
//!
//! # Seeds
//!
//! Every random quantity is derived from [`ExperimentConfig::seed`]:
//!
//! * repeat `r` owns three ChaCha8 streams keyed by `seed + r`: stream 0
//!   yields one feeder seed per training episode, stream 1 drives
//!   exploration, stream 2 yields one feeder seed per test episode;
//! * constant-control sweeps draw their episode seeds from stream 3 of `seed`.
//!
//! The feeder seed only matters for the stochastic capacitance draw.

mod protocol;
mod stats;

pub use protocol::*;
pub use stats::*;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{reward, select_action, AgentConfig, QTable};
use crate::control::{baseline_voltage, ProportionalController, ReferenceProfile, VoltageLimits};
use crate::discretization::{BinningStrategy, StateEncoder};
use crate::error::{invalid, Error, Result};
use crate::feeder::{default_feeder, init_states, FeederState, DEFAULT_SUBSTEP_S};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Simulated time before recording starts, run uncontrolled at v = 1.
    pub start_time: f64,
    pub horizon: f64,
    pub control_step: f64,
    pub substep: f64,
    pub n_train_episodes: usize,
    pub n_test_episodes: usize,
    pub n_repeats: usize,
    pub smoothing_window: usize,
    /// Episodes per k in a stochastic constant-control sweep.
    pub sweep_samples: usize,
    pub profile: ReferenceProfile,
    pub stochastic: bool,
    pub binning: BinningStrategy,
    pub agent: AgentConfig,
    pub seed: u64,
    pub limits: VoltageLimits,
    /// Longer test window for generalization runs.
    pub test_horizon: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            start_time: 0.0,
            horizon: 200.0,
            control_step: 1.0,
            substep: DEFAULT_SUBSTEP_S,
            n_train_episodes: 100,
            n_test_episodes: 50,
            n_repeats: 5,
            smoothing_window: 20,
            sweep_samples: 50,
            profile: ReferenceProfile::constant(1.2).unwrap(),
            stochastic: false,
            binning: BinningStrategy::default(),
            agent: AgentConfig::default(),
            seed: 0,
            limits: VoltageLimits::default(),
            test_horizon: None,
        }
    }
}

fn whole_multiple(total: f64, unit: f64) -> Option<usize> {
    let n = (total / unit).round();
    ((n * unit - total).abs() <= 1e-9 * total.abs().max(1.0)).then_some(n as usize)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.control_step > 0.0) || !(self.substep > 0.0) {
            return Err(invalid("control step and sub-step must be positive"));
        }
        if !(self.horizon > 0.0) || !(self.start_time >= 0.0) {
            return Err(invalid("horizon must be positive and start time non-negative"));
        }
        for (name, t) in [("horizon", self.horizon), ("start time", self.start_time)]
            .into_iter()
            .chain(self.test_horizon.map(|t| ("test horizon", t)))
        {
            if whole_multiple(t, self.control_step).is_none() {
                return Err(invalid(format!(
                    "{name} {t} is not a whole number of {} s control steps",
                    self.control_step
                )));
            }
        }
        match whole_multiple(self.control_step, self.substep) {
            Some(n) if n >= 1 => {}
            _ => return Err(invalid("control step must be a whole number of sub-steps")),
        }
        if let Some(t) = self.test_horizon {
            if !(t >= self.horizon) {
                return Err(invalid(format!("test horizon {t} shorter than training horizon")));
            }
        }
        if self.smoothing_window < 1 {
            return Err(invalid("smoothing window must be at least 1"));
        }
        self.agent.validate()?;
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        whole_multiple(self.horizon, self.control_step).unwrap_or(0)
    }

    pub fn substeps(&self) -> usize {
        whole_multiple(self.control_step, self.substep).unwrap_or(1).max(1)
    }

    pub fn encoder(&self) -> Result<StateEncoder> {
        self.binning.encoder(&self.profile)
    }

    pub fn controller(&self) -> ProportionalController {
        ProportionalController::new(self.limits)
    }

    /// Same config with the recorded window extended to the test horizon.
    pub fn test_window(&self) -> ExperimentConfig {
        ExperimentConfig { horizon: self.test_horizon.unwrap_or(self.horizon), ..self.clone() }
    }
}

/// Who picks `k` at each control step.
pub enum Policy<'a> {
    /// Nominal voltage, no controller.
    Baseline,
    Fixed(f64),
    Greedy { q: &'a QTable, encoder: &'a StateEncoder, actions: &'a [f64] },
    Learning {
        q: &'a mut QTable,
        encoder: &'a StateEncoder,
        agent: &'a AgentConfig,
        eps: f64,
        rng: &'a mut ChaCha8Rng,
    },
}

/// Trajectory sampled at control steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub times: Vec<f64>,
    pub apl: Vec<f64>,
    pub rpl: Vec<f64>,
    pub voltages: Vec<f64>,
    pub actions: Vec<f64>,
    pub mse: f64,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Mean of `(apl − rpl)²` over the recorded samples.
pub fn episode_mse(record: &EpisodeRecord) -> Result<f64> {
    mse(&record.apl, &record.rpl)
}

pub fn mse(apl: &[f64], rpl: &[f64]) -> Result<f64> {
    if apl.is_empty() || apl.len() != rpl.len() {
        return Err(Error::InvalidInput("MSE needs equally long, non-empty series".into()));
    }
    Ok(apl.iter().zip(rpl).map(|(a, r)| (a - r) * (a - r)).sum::<f64>() / apl.len() as f64)
}

pub fn run_episode(policy: Policy<'_>, config: &ExperimentConfig, seed: u64) -> Result<EpisodeRecord> {
    run_episode_observed(policy, config, seed, |_| {})
}

/// Runs one episode, calling `observe` with the feeder state at every
/// recorded control step (before the step is taken).
///
/// At each step the agent sees APL at the voltage held over the previous
/// step, picks `k`, the controller sets the voltage and the feeder advances.
/// A learning policy is rewarded with the tracking error observed after the
/// step.
pub fn run_episode_observed(
    mut policy: Policy<'_>,
    config: &ExperimentConfig,
    seed: u64,
    mut observe: impl FnMut(&FeederState),
) -> Result<EpisodeRecord> {
    config.validate()?;
    let feeder = default_feeder(config.stochastic, seed);
    let mut state = init_states(&feeder);
    let substeps = config.substeps();
    let dt = config.control_step;
    let controller = config.controller();

    let warmup = whole_multiple(config.start_time, dt).unwrap_or(0);
    for _ in 0..warmup {
        state.step(&feeder, baseline_voltage(), dt, substeps)?;
    }

    let n = config.n_steps();
    let mut rec = EpisodeRecord {
        times: Vec::with_capacity(n),
        apl: Vec::with_capacity(n),
        rpl: Vec::with_capacity(n),
        voltages: Vec::with_capacity(n),
        actions: Vec::with_capacity(n),
        mse: 0.0,
    };
    for i in 0..n {
        let t = config.start_time + i as f64 * dt;
        let apl = state.aggregate_power(&feeder);
        let rpl = config.profile.at(t);
        observe(&state);

        let (k, chosen) = match &mut policy {
            Policy::Baseline => (0.0, None),
            Policy::Fixed(k) => (*k, None),
            Policy::Greedy { q, encoder, actions } => {
                let a = q.best_action(encoder.encode(apl, rpl))?;
                (actions[a], None)
            }
            Policy::Learning { q, encoder, agent, eps, rng } => {
                let s = encoder.encode(apl, rpl);
                let a = select_action(q, s, *eps, *rng)?;
                (agent.actions[a], Some((s, a)))
            }
        };
        let v = match policy {
            Policy::Baseline => baseline_voltage(),
            _ => controller.voltage(k, apl, rpl),
        };
        rec.times.push(t);
        rec.apl.push(apl);
        rec.rpl.push(rpl);
        rec.voltages.push(v);
        rec.actions.push(k);

        state.step(&feeder, v, dt, substeps)?;

        if let (Policy::Learning { q, encoder, agent, .. }, Some((s, a))) = (&mut policy, chosen) {
            let next_apl = state.aggregate_power(&feeder);
            let next_rpl = config.profile.at(t + dt);
            let r = reward(next_apl, next_rpl, agent.reward_scale);
            let s_next = encoder.encode(next_apl, next_rpl);
            q.update(s, a, r, s_next, agent.learning_rate, agent.discount)?;
        }
    }
    rec.mse = episode_mse(&rec)?;
    Ok(rec)
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn repeat_seed(base: u64, repeat: usize) -> u64 {
    base.wrapping_add(repeat as u64)
}

pub(crate) fn train_seed_stream(base: u64, repeat: usize) -> ChaCha8Rng {
    stream(repeat_seed(base, repeat), 0)
}

pub(crate) fn exploration_stream(base: u64, repeat: usize) -> ChaCha8Rng {
    stream(repeat_seed(base, repeat), 1)
}

/// Feeder seeds of the test episodes that follow training repeat `repeat`.
pub fn test_seeds(base: u64, repeat: usize, n: usize) -> Vec<u64> {
    let mut rng = stream(repeat_seed(base, repeat), 2);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Feeder seeds shared by every `k` of a constant-control sweep.
pub fn sweep_seeds(base: u64, n: usize) -> Vec<u64> {
    let mut rng = stream(base, 3);
    (0..n).map(|_| rng.next_u64()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det() -> ExperimentConfig {
        ExperimentConfig::default()
    }

    #[test]
    fn mse_examples() {
        let rec = |apl: Vec<f64>, rpl: Vec<f64>| EpisodeRecord {
            times: vec![0.0; apl.len()],
            voltages: vec![1.0; apl.len()],
            actions: vec![0.0; apl.len()],
            apl,
            rpl,
            mse: 0.0,
        };
        assert_eq!(episode_mse(&rec(vec![1.2, 1.3], vec![1.2, 1.3])).unwrap(), 0.0);
        let m = episode_mse(&rec(vec![1.3, 1.4], vec![1.2, 1.3])).unwrap();
        assert!((m - 0.01).abs() < 1e-12);
        let m = episode_mse(&rec(vec![1.0, 1.4], vec![1.2, 1.2])).unwrap();
        assert!((m - 0.04).abs() < 1e-12);
        assert!(episode_mse(&rec(vec![], vec![])).is_err());
    }

    #[test]
    fn zero_gain_matches_baseline() {
        let cfg = det();
        let base = run_episode(Policy::Baseline, &cfg, 0).unwrap();
        let zero = run_episode(Policy::Fixed(0.0), &cfg, 0).unwrap();
        assert_eq!(base.apl, zero.apl);
        assert_eq!(base.mse, zero.mse);
        assert!((base.apl[0] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn record_bookkeeping() {
        let cfg = ExperimentConfig { control_step: 5.0, stochastic: true, ..det() };
        let rec = run_episode(Policy::Fixed(0.5), &cfg, 3).unwrap();
        assert_eq!(rec.len(), 40);
        assert_eq!(rec.times[1], 5.0);
        assert!((episode_mse(&rec).unwrap() - rec.mse).abs() < 1e-12);
        assert!(rec.voltages.iter().all(|v| (0.9..=1.1).contains(v)));
    }

    #[test]
    fn start_time_shifts_window() {
        let cfg = ExperimentConfig { start_time: 175.0, ..det() };
        let rec = run_episode(Policy::Baseline, &cfg, 0).unwrap();
        assert_eq!(rec.times[0], 175.0);
        assert_eq!(*rec.times.last().unwrap(), 374.0);
        let long = run_episode(Policy::Baseline, &ExperimentConfig { horizon: 375.0, ..det() }, 0).unwrap();
        assert_eq!(&long.apl[175..], &rec.apl[..]);
    }

    #[test]
    fn episodes_are_deterministic() {
        let cfg = ExperimentConfig { stochastic: true, ..det() };
        let a = run_episode(Policy::Fixed(2.0), &cfg, 77).unwrap();
        let b = run_episode(Policy::Fixed(2.0), &cfg, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(det().validate().is_ok());
        assert!(ExperimentConfig { horizon: 200.5, ..det() }.validate().is_err());
        assert!(ExperimentConfig { control_step: 0.0, ..det() }.validate().is_err());
        assert!(ExperimentConfig { test_horizon: Some(100.0), ..det() }.validate().is_err());
        assert!(ExperimentConfig { smoothing_window: 0, ..det() }.validate().is_err());
        assert_eq!(ExperimentConfig { control_step: 5.0, ..det() }.substeps(), 500);
    }

    #[test]
    fn seed_streams_are_distinct() {
        assert_ne!(test_seeds(0, 0, 3), test_seeds(0, 1, 3));
        assert_ne!(test_seeds(0, 0, 3), sweep_seeds(0, 3));
        assert_eq!(test_seeds(9, 2, 4), test_seeds(9, 2, 4));
        assert_eq!(test_seeds(9, 2, 4)[..2], test_seeds(9, 2, 2)[..]);
    }
}
