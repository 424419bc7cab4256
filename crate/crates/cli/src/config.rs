//! Command-line flags and the optional TOML config file that can set them.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use crate::run::CliError;

pub const CACHE_ENV: &str = "TRENDSCAN_CACHE_DIR";

#[derive(Args, Debug, Default, Clone)]
pub struct TestArgs {
    /// TOML file providing defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV with one row per (date, unit).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Significance level [default: 0.05].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// `scale` (scale-dependent critical values) or `uniform` [default: scale].
    #[arg(long)]
    pub mode: Option<String>,
    /// Monte Carlo draws for the critical values [default: 5000].
    #[arg(long)]
    pub draws: Option<usize>,
    /// Seed of the Monte Carlo draws [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// `all`, or comma separated `UNIT:UNIT` pairs.
    #[arg(long)]
    pub pairs: Option<String>,
    /// `default`, or e.g. `lengths=7,14;offsets=1,4;stride=7`.
    #[arg(long)]
    pub family: Option<String>,
    /// Quantile cache directory.
    #[arg(long, env = CACHE_ENV)]
    pub cache_dir: Option<PathBuf>,
    /// Output directory [default: trendscan-out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub date_col: Option<String>,
    #[arg(long)]
    pub unit_col: Option<String>,
    #[arg(long)]
    pub cases_col: Option<String>,
    /// Smoothing half-width in days for the trend panel [default: 7].
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// CSV (unit, day, value) drawn as an extra panel in every figure.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Skip SVG output.
    #[arg(long)]
    pub no_figures: bool,
}

/// Same keys as the long flags, with `-` replaced by `_`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestFile {
    input: Option<PathBuf>,
    alpha: Option<f64>,
    mode: Option<String>,
    draws: Option<usize>,
    seed: Option<u64>,
    pairs: Option<String>,
    family: Option<String>,
    cache_dir: Option<PathBuf>,
    out: Option<PathBuf>,
    date_col: Option<String>,
    unit_col: Option<String>,
    cases_col: Option<String>,
    bandwidth: Option<usize>,
    overlay: Option<PathBuf>,
    no_figures: Option<bool>,
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// Paths in a config file are relative to the file itself.
fn rel(base: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| if p.is_relative() { base.join(p) } else { p })
}

impl TestArgs {
    /// Flags win over the config file.
    pub fn resolve(self) -> Result<TestArgs, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let f: TestFile = read_toml(&path)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(TestArgs {
            config: self.config,
            input: self.input.or(rel(&base, f.input)),
            alpha: self.alpha.or(f.alpha),
            mode: self.mode.or(f.mode),
            draws: self.draws.or(f.draws),
            seed: self.seed.or(f.seed),
            pairs: self.pairs.or(f.pairs),
            family: self.family.or(f.family),
            cache_dir: self.cache_dir.or(rel(&base, f.cache_dir)),
            out: self.out.or(rel(&base, f.out)),
            date_col: self.date_col.or(f.date_col),
            unit_col: self.unit_col.or(f.unit_col),
            cases_col: self.cases_col.or(f.cases_col),
            bandwidth: self.bandwidth.or(f.bandwidth),
            overlay: self.overlay.or(rel(&base, f.overlay)),
            no_figures: self.no_figures || f.no_figures.unwrap_or(false),
        })
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct SimulateArgs {
    /// TOML file providing defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Series length [default: 100].
    #[arg(long = "T", alias = "t-len")]
    pub t_len: Option<usize>,
    /// Number of series [default: 5].
    #[arg(long)]
    pub n: Option<usize>,
    /// Overdispersion sigma (> 1) [default: 15].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// `A` or `B` for power runs; size runs always use the common trend.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Replications [default: 1000].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma separated levels [default: 0.01,0.05,0.1].
    #[arg(long)]
    pub alphas: Option<String>,
    /// Master seed [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo draws for the critical values [default: 5000].
    #[arg(long)]
    pub draws: Option<usize>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    #[serde(rename = "T")]
    t_len: Option<usize>,
    n: Option<usize>,
    sigma: Option<f64>,
    scenario: Option<String>,
    reps: Option<usize>,
    alphas: Option<String>,
    seed: Option<u64>,
    draws: Option<usize>,
    out: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn resolve(self) -> Result<SimulateArgs, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let f: SimulateFile = read_toml(&path)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(SimulateArgs {
            config: self.config,
            t_len: self.t_len.or(f.t_len),
            n: self.n.or(f.n),
            sigma: self.sigma.or(f.sigma),
            scenario: self.scenario.or(f.scenario),
            reps: self.reps.or(f.reps),
            alphas: self.alphas.or(f.alphas),
            seed: self.seed.or(f.seed),
            draws: self.draws.or(f.draws),
            out: self.out.or(rel(&base, f.out)),
        })
    }
}
