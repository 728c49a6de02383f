//! Voltage control of a feeder of thermostatically controlled loads, learnt
//! with tabular Q-learning.
//!
//! * [`feeder`]: the 20-load hybrid thermal/electrical simulator;
//! * [`control`]: the proportional voltage law and reference profiles;
//! * [`discretization`]: binning of observations into Q-table states;
//! * [`agent`]: the Q-table, epsilon-greedy selection and TD update;
//! * [`experiment`]: episodes, constant-control sweeps, training and testing.
//!
//! ```
//! use tcl_rl::experiment::{run_episode, ExperimentConfig, Policy};
//!
//! let cfg = ExperimentConfig { horizon: 50.0, ..ExperimentConfig::default() };
//! let baseline = run_episode(Policy::Baseline, &cfg, 0)?;
//! let controlled = run_episode(Policy::Fixed(0.5), &cfg, 0)?;
//! assert_eq!(baseline.apl.len(), 50);
//! println!("baseline MSE {:.4}, k = 0.5 MSE {:.4}", baseline.mse, controlled.mse);
//! # Ok::<(), tcl_rl::Error>(())
//! ```

pub mod agent;
pub mod control;
pub mod discretization;
pub mod error;
pub mod experiment;
pub mod feeder;

pub use error::{Error, Result};
