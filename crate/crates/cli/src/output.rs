use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use tcl_rl::experiment::ExperimentConfig;

pub fn prepare_dir(out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

pub fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))
}

/// Empty string for a missing gain.
pub fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
pub struct Manifest<'a, X: Serialize> {
    pub command: &'a str,
    pub argv: &'a [String],
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub version: &'static str,
    pub timestamp_unix: u64,
    pub outputs: Vec<String>,
    pub extra: X,
}

pub fn write_manifest<X: Serialize>(
    out: &Path,
    command: &str,
    argv: &[String],
    config: &ExperimentConfig,
    outputs: &[&str],
    extra: X,
) -> anyhow::Result<()> {
    let manifest = Manifest {
        command,
        argv,
        config,
        seed: config.seed,
        out_dir: out.to_path_buf(),
        version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        extra,
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}
