//! Run configuration: a JSON file merged with command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use plsmooth::norms::RINorm;
use serde::{Deserialize, Serialize};

/// Flags shared by every command. Each one overrides the matching key of
/// the configuration file.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Mesh document with pieces (JSON).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory for the report, tables and grid dump.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Configuration file (JSON); flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Exponent of the forward Sobolev error.
    #[arg(long)]
    pub p: Option<f64>,
    /// Exponent of the inverse Sobolev error.
    #[arg(long)]
    pub q: Option<f64>,
    /// Scales of the sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Scale used by `smooth`.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Target total error of the sweep.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Extra rearrangement-invariant norm: `lp:P`, `lorentz:P:Q` or `linf`.
    #[arg(long = "norm")]
    pub norms: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Dump `g` on an n×n×n grid over the bounding box.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Samples of the injectivity audit.
    #[arg(long)]
    pub samples: Option<usize>,
}

/// Keys accepted in a configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub norms: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub grid: Option<usize>,
    pub samples: Option<usize>,
    pub edge_fraction: Option<f64>,
    pub face_fraction: Option<f64>,
}

impl FileConfig {
    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub input: PathBuf,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub p: f64,
    pub q: f64,
    pub norms: Vec<RINorm>,
    pub lambdas: Vec<f64>,
    pub lambda: f64,
    pub epsilon: f64,
    pub seed: u64,
    #[serde(skip)]
    pub workers: Option<usize>,
    pub grid: Option<usize>,
    pub samples: usize,
    pub edge_fraction: f64,
    pub face_fraction: f64,
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, String> {
        let file = match &flags.config {
            Some(path) => FileConfig::read(path)?,
            None => FileConfig::default(),
        };
        let norm_specs = if flags.norms.is_empty() { file.norms.unwrap_or_default() } else { flags.norms.clone() };
        let norms =
            norm_specs.iter().map(|s| s.parse::<RINorm>().map_err(|e| e.to_string())).collect::<Result<Vec<_>, _>>()?;
        let cfg = RunConfig {
            input: flags.input.clone().or(file.input).ok_or("no input mesh given (--input)")?,
            out: flags.out.clone().or(file.out),
            p: flags.p.or(file.p).unwrap_or(2.0),
            q: flags.q.or(file.q).unwrap_or(2.0),
            norms,
            lambdas: flags.lambdas.clone().or(file.lambdas).unwrap_or_else(|| (0..9).map(|k| 0.5f64.powi(k)).collect()),
            lambda: flags.lambda.or(file.lambda).unwrap_or(1.0),
            epsilon: flags.epsilon.or(file.epsilon).unwrap_or(1e-2),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            workers: flags.workers.or(file.workers),
            grid: flags.grid.or(file.grid),
            samples: flags.samples.or(file.samples).unwrap_or(100_000),
            edge_fraction: file.edge_fraction.unwrap_or(0.1),
            face_fraction: file.face_fraction.unwrap_or(0.1),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), String> {
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(1.0..=64.0).contains(&v) {
                return Err(format!("{name} = {v} outside [1, 64]"));
            }
        }
        if self.lambdas.is_empty() {
            return Err("empty λ list".into());
        }
        for &l in self.lambdas.iter().chain([self.lambda].iter()) {
            if !(l > 0.0 && l <= 1.0) {
                return Err(format!("λ = {l} outside (0, 1]"));
            }
        }
        if !(self.epsilon >= 0.0) {
            return Err(format!("ε = {} must be nonnegative", self.epsilon));
        }
        if self.samples == 0 || self.workers == Some(0) || self.grid == Some(0) {
            return Err("samples, workers and grid must be positive".into());
        }
        for (name, v) in [("edge_fraction", self.edge_fraction), ("face_fraction", self.face_fraction)] {
            if !(v > 0.0 && v < 0.5) {
                return Err(format!("{name} = {v} outside (0, 0.5)"));
            }
        }
        Ok(())
    }
}
