//! Flag parsing and merging with the optional config file. Flags win.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;
use tcl_rl::control::{ReferenceProfile, VoltageLimits};
use tcl_rl::discretization::{BinningStrategy, HistoricalDataset};
use tcl_rl::experiment::ExperimentConfig;

use crate::{InputError, UsageError};

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Key-value (TOML) file using the long flag names as keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stochastic capacitance draw per episode.
    #[arg(long)]
    pub stochastic: bool,
    /// `constant:<level>` or `step:<before>,<after>,<t>`.
    #[arg(long)]
    pub profile: Option<String>,
    /// Recorded window length, seconds.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Start of the recorded window, seconds.
    #[arg(long)]
    pub start: Option<f64>,
    /// Control step, seconds.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Training episodes per repeat.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Test episodes per repeat.
    #[arg(long)]
    pub tests: Option<usize>,
    /// `equal:lo,hi,n` | `fd[:file]` | `quantile:[file,]n` | `rpledge:lo,hi,n`.
    #[arg(long)]
    pub binning: Option<String>,
    /// Historical APL file for `fd` and `quantile` binning.
    #[arg(long)]
    pub historical: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub vmin: Option<f64>,
    #[arg(long)]
    pub vmax: Option<f64>,
    /// Test window length for generalization runs, seconds.
    #[arg(long)]
    pub test_horizon: Option<f64>,
    /// Smoothing window for training curves.
    #[arg(long)]
    pub window: Option<usize>,
    /// Episodes per k in a stochastic sweep.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    stochastic: Option<bool>,
    profile: Option<String>,
    horizon: Option<f64>,
    start: Option<f64>,
    step: Option<f64>,
    repeats: Option<usize>,
    episodes: Option<usize>,
    tests: Option<usize>,
    binning: Option<String>,
    historical: Option<PathBuf>,
    out: Option<PathBuf>,
    vmin: Option<f64>,
    vmax: Option<f64>,
    test_horizon: Option<f64>,
    window: Option<usize>,
    samples: Option<usize>,
}

fn load_file(path: &Path) -> anyhow::Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| InputError(format!("malformed config {}: {e}", path.display())).into())
}

/// Flags merged over the config file, defaults filled in.
#[derive(Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub out: PathBuf,
}

fn numbers(spec: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| UsageError(format!("bad number {s:?} in {what}")).into())
        })
        .collect()
}

pub fn parse_profile(spec: &str) -> anyhow::Result<ReferenceProfile> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| UsageError(format!("profile {spec:?} must look like constant:<lvl> or step:<a>,<b>,<t>")))?;
    let v = numbers(rest, "profile")?;
    let profile = match (kind, v.as_slice()) {
        ("constant", [level]) => ReferenceProfile::constant(*level),
        ("step", [before, after, t]) => ReferenceProfile::step(*before, *after, *t),
        _ => return Err(UsageError(format!("unrecognised profile {spec:?}")).into()),
    };
    profile.map_err(|e| UsageError(e.to_string()).into())
}

fn load_historical(inline: Option<&str>, flag: Option<&Path>) -> anyhow::Result<HistoricalDataset> {
    let path = match (inline, flag) {
        (Some(p), _) => PathBuf::from(p),
        (None, Some(p)) => p.to_path_buf(),
        (None, None) => {
            return Err(InputError("this binning needs historical data (--historical <file>)".into()).into())
        }
    };
    HistoricalDataset::load(&path)
        .map_err(|e| InputError(format!("cannot load historical data {}: {e}", path.display())).into())
}

pub fn parse_binning(spec: &str, historical: Option<&Path>) -> anyhow::Result<BinningStrategy> {
    let (kind, rest) = match spec.split_once(':') {
        Some((k, r)) => (k, Some(r)),
        None => (spec, None),
    };
    let count = |s: &str| -> anyhow::Result<usize> {
        s.trim().parse().map_err(|_| UsageError(format!("bad bin count {s:?}")).into())
    };
    let triple = |rest: Option<&str>| -> anyhow::Result<(f64, f64, usize)> {
        let parts: Vec<&str> = rest.unwrap_or("").split(',').collect();
        match parts.as_slice() {
            [lo, hi, n] => {
                let v = numbers(&format!("{lo},{hi}"), "binning")?;
                Ok((v[0], v[1], count(n)?))
            }
            _ => Err(UsageError(format!("binning {spec:?} needs lo,hi,n")).into()),
        }
    };
    Ok(match kind {
        "equal" => {
            let (lo, hi, n_bins) = triple(rest)?;
            BinningStrategy::EqualWidth { lo, hi, n_bins }
        }
        "rpledge" => {
            let (lo, hi, n_bins) = triple(rest)?;
            BinningStrategy::RplEdge { lo, hi, n_bins }
        }
        "fd" => BinningStrategy::FreedmanDiaconis { data: load_historical(rest, historical)? },
        "quantile" => {
            let rest = rest.ok_or_else(|| UsageError("quantile binning needs a bin count".into()))?;
            let (file, n) = match rest.rsplit_once(',') {
                Some((file, n)) => (Some(file), n),
                None => (None, rest),
            };
            BinningStrategy::Quantile { data: load_historical(file, historical)?, n_bins: count(n)? }
        }
        _ => return Err(UsageError(format!("unknown binning {spec:?}")).into()),
    })
}

impl Common {
    pub fn resolve(&self, command: &str) -> anyhow::Result<Resolved> {
        let file = match &self.config {
            Some(path) => load_file(path)?,
            None => FileConfig::default(),
        };
        let defaults = ExperimentConfig::default();
        let profile = match self.profile.as_ref().or(file.profile.as_ref()) {
            Some(spec) => parse_profile(spec)?,
            None => defaults.profile,
        };
        let historical = self.historical.as_deref().or(file.historical.as_deref());
        let binning = match self.binning.as_ref().or(file.binning.as_ref()) {
            Some(spec) => parse_binning(spec, historical)?,
            None => defaults.binning.clone(),
        };
        let limits = VoltageLimits::new(
            self.vmin.or(file.vmin).unwrap_or(defaults.limits.v_min),
            self.vmax.or(file.vmax).unwrap_or(defaults.limits.v_max),
        )
        .map_err(|e| UsageError(e.to_string()))?;

        let config = ExperimentConfig {
            start_time: self.start.or(file.start).unwrap_or(defaults.start_time),
            horizon: self.horizon.or(file.horizon).unwrap_or(defaults.horizon),
            control_step: self.step.or(file.step).unwrap_or(defaults.control_step),
            n_train_episodes: self.episodes.or(file.episodes).unwrap_or(defaults.n_train_episodes),
            n_test_episodes: self.tests.or(file.tests).unwrap_or(defaults.n_test_episodes),
            n_repeats: self.repeats.or(file.repeats).unwrap_or(defaults.n_repeats),
            smoothing_window: self.window.or(file.window).unwrap_or(defaults.smoothing_window),
            sweep_samples: self.samples.or(file.samples).unwrap_or(defaults.sweep_samples),
            profile,
            stochastic: self.stochastic || file.stochastic.unwrap_or(false),
            binning,
            seed: self.seed.or(file.seed).unwrap_or(defaults.seed),
            limits,
            test_horizon: self.test_horizon.or(file.test_horizon),
            ..defaults
        };
        config.validate().map_err(|e| UsageError(e.to_string()))?;
        profile
            .validate_window(config.start_time, config.test_horizon.unwrap_or(config.horizon))
            .map_err(|e| UsageError(e.to_string()))?;
        let out = self
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("out").join(command));
        Ok(Resolved { config, out })
    }
}
