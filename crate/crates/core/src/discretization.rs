//! Binning of continuous observations into discrete state indices.
//!
//! A [`BinningSpec`] is an ordered list of edges. Intervals are left-closed and
//! right-open, except the last one which also owns the final edge. Values
//! outside the edges fall into the outermost bins, so encoding is total.
//!
//! Four ways of choosing edges are provided:
//!
//! * [`equal_width_edges`]: a fixed interval split into `n` equal bins;
//! * [`fd_edges`]: Freedman–Diaconis width `2·IQR·n^(−1/3)` over historical data;
//! * [`quantile_edges`]: empirical quantiles of historical data;
//! * [`rpl_edge_edges`]: equal-width bins on either side of the reference
//!   level, which is itself an edge.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{ProfileKind, ReferenceProfile};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    edges: Vec<f64>,
    pub open_left: bool,
    pub open_right: bool,
}

impl BinningSpec {
    pub fn new(edges: Vec<f64>, open_left: bool, open_right: bool) -> Result<Self> {
        if edges.is_empty() {
            return Err(invalid("binning needs at least one edge"));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(invalid("bin edges must be finite"));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("bin edges must be strictly increasing"));
        }
        Ok(BinningSpec { edges, open_left, open_right })
    }

    /// A spec with a single bin around `value`.
    pub fn single(value: f64) -> Result<Self> {
        BinningSpec::new(vec![value], true, true)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len().saturating_sub(1).max(1)
    }

    /// Bin index of `value`. Never fails: out-of-range values map to the
    /// outermost bins and NaN maps to bin 0.
    pub fn encode(&self, value: f64) -> usize {
        let above = self.edges.partition_point(|&e| e <= value);
        above.saturating_sub(1).min(self.n_bins() - 1)
    }

    /// Like [`encode`](Self::encode) but rejects values beyond a closed side.
    pub fn try_encode(&self, value: f64) -> Option<usize> {
        let first = self.edges[0];
        let last = *self.edges.last().unwrap();
        if (!self.open_left && value < first) || (!self.open_right && value > last) {
            return None;
        }
        Some(self.encode(value))
    }
}

pub fn encode(spec: &BinningSpec, value: f64) -> usize {
    spec.encode(value)
}

/// `n_bins` bins of width `(hi − lo) / n_bins`, outermost bins half-open.
pub fn equal_width_edges(lo: f64, hi: f64, n_bins: usize) -> Result<BinningSpec> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!("equal-width interval [{lo}, {hi}] is empty")));
    }
    if n_bins < 1 {
        return Err(invalid("need at least one bin"));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    BinningSpec::new(edges, true, true)
}

/// Equal-width bins on `[lo, rpl]` and `[rpl, hi]`, with `rpl` as an exact
/// edge. Bins are shared between the two sides in proportion to their length,
/// with at least one bin per side.
pub fn rpl_edge_edges(lo: f64, hi: f64, n_bins: usize, rpl: f64) -> Result<BinningSpec> {
    if !(lo < rpl && rpl < hi) {
        return Err(invalid(format!("reference level {rpl} must lie inside ({lo}, {hi})")));
    }
    if n_bins < 2 {
        return Err(invalid("a reference edge needs at least two bins"));
    }
    let share = (rpl - lo) / (hi - lo) * n_bins as f64;
    let n_left = (share.round() as usize).clamp(1, n_bins - 1);
    let n_right = n_bins - n_left;
    let w_left = (rpl - lo) / n_left as f64;
    let w_right = (hi - rpl) / n_right as f64;
    let mut edges: Vec<f64> = (0..n_left).map(|i| lo + i as f64 * w_left).collect();
    edges.extend((0..n_right).map(|i| rpl + i as f64 * w_right));
    edges.push(hi);
    BinningSpec::new(edges, true, true)
}

/// Freedman–Diaconis binning over the dataset's range.
///
/// The interquartile range is taken between the medians of the lower and
/// upper halves of the sorted sample (the middle element is excluded for odd
/// sizes).
pub fn fd_edges(data: &HistoricalDataset) -> Result<BinningSpec> {
    let width = fd_bin_width(&data.samples)?;
    let (min, max) = min_max(&data.samples);
    let n_bins = (((max - min) / width).ceil() as usize).max(1);
    let mut edges: Vec<f64> = (0..=n_bins).map(|i| min + i as f64 * width).collect();
    // Guard against the last edge landing a hair below max through rounding.
    let last = edges.last_mut().unwrap();
    if *last < max {
        *last = max;
    }
    BinningSpec::new(edges, true, true)
}

pub fn fd_bin_width(samples: &[f64]) -> Result<f64> {
    check_samples(samples)?;
    if count_distinct(samples) < 2 {
        return Err(Error::DegenerateData("need at least two distinct samples".into()));
    }
    let iqr = hinge_iqr(samples);
    if !(iqr > 0.0) {
        return Err(Error::DegenerateData("interquartile range is zero".into()));
    }
    Ok(2.0 * iqr * (samples.len() as f64).powf(-1.0 / 3.0))
}

fn hinge_iqr(samples: &[f64]) -> f64 {
    let n = samples.len();
    let half = n / 2;
    let mut lower = samples.to_vec();
    lower.sort_unstable_by(f64::total_cmp);
    let upper = lower.split_off(n - half);
    lower.truncate(half);
    median_sorted(&upper) - median_sorted(&lower)
}

fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Edges at the `i / n_bins` empirical quantiles, linearly interpolated
/// between order statistics. Heavy ties can make neighbouring quantiles equal;
/// such duplicate edges are merged, leaving fewer bins.
pub fn quantile_edges(data: &HistoricalDataset, n_bins: usize) -> Result<BinningSpec> {
    if n_bins < 1 {
        return Err(invalid("need at least one bin"));
    }
    check_samples(&data.samples)?;
    let distinct = count_distinct(&data.samples);
    if distinct < n_bins.max(2) {
        return Err(Error::DegenerateData(format!(
            "{distinct} distinct samples cannot support {n_bins} quantile bins"
        )));
    }
    let mut sorted = data.samples.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|i| quantile_sorted(&sorted, i as f64 / n_bins as f64))
        .collect();
    edges.dedup();
    BinningSpec::new(edges, true, true)
}

/// Linear-interpolation quantile of already sorted data, `p ∈ [0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::DegenerateData("historical dataset is empty".into()));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::DegenerateData("historical dataset has non-finite values".into()));
    }
    Ok(())
}

fn count_distinct(samples: &[f64]) -> usize {
    let mut s = samples.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s.dedup();
    s.len()
}

fn min_max(samples: &[f64]) -> (f64, f64) {
    samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ConstantSweep,
    EarlyQl,
    Unknown,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::ConstantSweep => "constant-sweep",
            Provenance::EarlyQl => "early-ql",
            Provenance::Unknown => "unknown",
        })
    }
}

/// APL observations gathered from earlier runs.
///
/// Text form: one value per line, blank lines ignored, `#` starts a comment.
/// A `# provenance: <tag>` comment sets the provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricalDataset {
    pub samples: Vec<f64>,
    pub provenance: Provenance,
}

impl HistoricalDataset {
    pub fn new(samples: Vec<f64>, provenance: Provenance) -> Self {
        HistoricalDataset { samples, provenance }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        let mut provenance = Provenance::Unknown;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(tag) = comment.trim().strip_prefix("provenance:") {
                    provenance = match tag.trim() {
                        "constant-sweep" => Provenance::ConstantSweep,
                        "early-ql" => Provenance::EarlyQl,
                        _ => Provenance::Unknown,
                    };
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let value: f64 = line.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("expected a number, found {line:?}"),
            })?;
            samples.push(value);
        }
        Ok(HistoricalDataset { samples, provenance })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# provenance: {}\n", self.provenance);
        for s in &self.samples {
            out.push_str(&format!("{s}\n"));
        }
        out
    }
}

/// How APL edges are chosen for an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum BinningStrategy {
    EqualWidth { lo: f64, hi: f64, n_bins: usize },
    FreedmanDiaconis { data: HistoricalDataset },
    Quantile { data: HistoricalDataset, n_bins: usize },
    /// Uses the profile's initial level as the reference edge.
    RplEdge { lo: f64, hi: f64, n_bins: usize },
}

impl Default for BinningStrategy {
    fn default() -> Self {
        BinningStrategy::EqualWidth { lo: 0.9, hi: 1.7, n_bins: 10 }
    }
}

impl BinningStrategy {
    pub fn apl_spec(&self, profile: &ReferenceProfile) -> Result<BinningSpec> {
        match self {
            BinningStrategy::EqualWidth { lo, hi, n_bins } => equal_width_edges(*lo, *hi, *n_bins),
            BinningStrategy::FreedmanDiaconis { data } => fd_edges(data),
            BinningStrategy::Quantile { data, n_bins } => quantile_edges(data, *n_bins),
            BinningStrategy::RplEdge { lo, hi, n_bins } => {
                rpl_edge_edges(*lo, *hi, *n_bins, profile.level_before)
            }
        }
    }

    pub fn encoder(&self, profile: &ReferenceProfile) -> Result<StateEncoder> {
        Ok(StateEncoder { apl: self.apl_spec(profile)?, rpl: rpl_spec(profile)? })
    }
}

/// One bin for a constant reference, one bin per level for a step profile.
pub fn rpl_spec(profile: &ReferenceProfile) -> Result<BinningSpec> {
    let levels = profile.levels();
    match (profile.kind, levels.as_slice()) {
        (ProfileKind::StepDown, [a, b]) => BinningSpec::new(vec![*a, 0.5 * (a + b), *b], true, true),
        _ => BinningSpec::single(levels[0]),
    }
}

/// Joint (APL, RPL) encoding, flattened row-major with APL as the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEncoder {
    pub apl: BinningSpec,
    pub rpl: BinningSpec,
}

impl StateEncoder {
    pub fn n_states(&self) -> usize {
        self.apl.n_bins() * self.rpl.n_bins()
    }

    pub fn encode(&self, apl: f64, rpl: f64) -> usize {
        self.apl.encode(apl) * self.rpl.n_bins() + self.rpl.encode(rpl)
    }
}
