//! Negative-binomial panels around Gaussian-bump trends and the size and
//! power experiments built on them.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::IntervalFamily;
use crate::multiscale::{critical_values, rejects};
use crate::quantile::{CriticalMode, QuantileTable, DEFAULT_DRAWS};
use crate::rng::{derive_seed, domain, substream};
use crate::stats::{all_statistics, overdispersion_pooled, CountSeries, PairSet};

/// `height * exp(-(rate * u - center)^2 / 2) + base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpTrend {
    pub height: f64,
    pub base: f64,
    pub rate: f64,
    pub center: f64,
}

impl BumpTrend {
    pub fn eval(&self, u: f64) -> f64 {
        let z = self.rate * u - self.center;
        self.height * (-z * z / 2.0).exp() + self.base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendFunction {
    /// Common trend of the null panels: peak 6000 at `u = 0.3`.
    Null,
    /// Same peak location, peak 7000.
    ScenarioA,
    /// Same peak height, reached at `u = 1/3`.
    ScenarioB,
    Custom(BumpTrend),
}

impl TrendFunction {
    pub fn bump(&self) -> BumpTrend {
        match *self {
            TrendFunction::Null => BumpTrend {
                height: 5000.0,
                base: 1000.0,
                rate: 10.0,
                center: 3.0,
            },
            TrendFunction::ScenarioA => BumpTrend {
                height: 6000.0,
                base: 1000.0,
                rate: 10.0,
                center: 3.0,
            },
            TrendFunction::ScenarioB => BumpTrend {
                height: 5000.0,
                base: 1000.0,
                rate: 9.0,
                center: 3.0,
            },
            TrendFunction::Custom(b) => b,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.bump().eval(u)
    }

    /// The trend is positive on `[0, 1]` iff base > 0 and the bump does not
    /// pull it below zero.
    pub fn validate(&self) -> Result<()> {
        let b = self.bump();
        if !(b.base > 0.0 && b.height >= 0.0 && b.rate.is_finite() && b.center.is_finite()) {
            return Err(Error::Config(format!(
                "trend must be strictly positive on [0, 1]: {b:?}"
            )));
        }
        Ok(())
    }
}

pub fn lambda_null(u: f64) -> f64 {
    TrendFunction::Null.eval(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "null")]
    Null,
    A,
    B,
}

impl Scenario {
    /// Trend of the first series; all others follow the null trend.
    pub fn first_trend(&self) -> TrendFunction {
        match self {
            Scenario::Null => TrendFunction::Null,
            Scenario::A => TrendFunction::ScenarioA,
            Scenario::B => TrendFunction::ScenarioB,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Scenario::Null => "null",
            Scenario::A => "A",
            Scenario::B => "B",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" | "Null" | "none" => Ok(Scenario::Null),
            "A" | "a" => Ok(Scenario::A),
            "B" | "b" => Ok(Scenario::B),
            other => Err(Error::Config(format!(
                "unknown scenario `{other}` (expected null, A or B)"
            ))),
        }
    }
}

pub fn lambda_scenario(u: f64, scenario: Scenario) -> f64 {
    scenario.first_trend().eval(u)
}

/// Negative binomial with `E = mean` and `Var = sigma_sq * mean`, i.e.
/// `q = 1 / sigma_sq` and `r = mean / (sigma_sq - 1)`, drawn as a
/// Gamma(`r`, scale `(1 - q) / q`) mixture of Poissons.
#[derive(Debug, Clone, Copy)]
pub struct NegativeBinomial {
    gamma: Option<Gamma<f64>>,
    poisson_mean: f64,
}

impl NegativeBinomial {
    pub fn new(mean: f64, sigma_sq: f64) -> Result<Self> {
        Self::with_poisson_fallback(mean, sigma_sq, false)
    }

    /// With `allow_poisson`, `sigma_sq == 1` gives a plain Poisson.
    pub fn with_poisson_fallback(mean: f64, sigma_sq: f64, allow_poisson: bool) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::Config(format!("mean must be positive, got {mean}")));
        }
        if allow_poisson && sigma_sq == 1.0 {
            return Ok(NegativeBinomial {
                gamma: None,
                poisson_mean: mean,
            });
        }
        if !(sigma_sq > 1.0 && sigma_sq.is_finite()) {
            return Err(Error::Config(format!(
                "parametrization requires sigma^2 > 1, got {sigma_sq}"
            )));
        }
        let shape = mean / (sigma_sq - 1.0);
        let scale = sigma_sq - 1.0;
        let gamma = Gamma::new(shape, scale)
            .map_err(|e| Error::Config(format!("gamma mixing law: {e}")))?;
        Ok(NegativeBinomial {
            gamma: Some(gamma),
            poisson_mean: mean,
        })
    }
}

impl Distribution<u64> for NegativeBinomial {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let rate = match &self.gamma {
            Some(g) => g.sample(rng),
            None => self.poisson_mean,
        };
        if rate <= 0.0 {
            return 0;
        }
        Poisson::new(rate)
            .expect("positive finite rate")
            .sample(rng) as u64
    }
}

/// One negative binomial draw with mean `mean` and variance `sigma_sq * mean`.
pub fn sample_nb<R: Rng + ?Sized>(mean: f64, sigma_sq: f64, rng: &mut R) -> Result<u64> {
    Ok(NegativeBinomial::new(mean, sigma_sq)?.sample(rng))
}

/// Panel with `X_it ~ NB(trends[i](t/T), sigma^2)`, independent cells;
/// series `i` of replication `rep` uses its own substream.
pub fn generate_panel(
    trends: &[TrendFunction],
    t_len: usize,
    sigma: f64,
    seed: u64,
    rep: u64,
) -> Result<Vec<CountSeries<f64>>> {
    let sigma_sq = sigma * sigma;
    trends
        .iter()
        .enumerate()
        .map(|(i, trend)| {
            trend.validate()?;
            let mut rng = substream(seed, &[domain::REPLICATION, rep, i as u64]);
            let counts = (1..=t_len)
                .map(|t| {
                    let mean = trend.eval(t as f64 / t_len as f64);
                    sample_nb(mean, sigma_sq, &mut rng)
                })
                .collect::<Result<Vec<u64>>>()?;
            Ok(CountSeries::from_counts(
                format!("series{}", i + 1),
                &counts,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub t_len: usize,
    pub sigma: f64,
    pub scenario: Scenario,
    pub reps: usize,
    pub alphas: Vec<f64>,
    pub draws: usize,
    pub seed: u64,
    pub mode: CriticalMode,
}

impl SimConfig {
    pub fn new(n: usize, t_len: usize, sigma: f64, scenario: Scenario, reps: usize) -> Self {
        SimConfig {
            n,
            t_len,
            sigma,
            scenario,
            reps,
            alphas: vec![0.01, 0.05, 0.1],
            draws: DEFAULT_DRAWS,
            seed: 1,
            mode: CriticalMode::Scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be >= 2, got {}", self.n)));
        }
        if self.sigma.is_nan() || self.sigma <= 1.0 {
            return Err(Error::Config(format!(
                "parametrization requires sigma^2 > 1, got sigma = {}",
                self.sigma
            )));
        }
        if self.reps == 0 {
            return Err(Error::Config("at least one replication is required".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("no significance levels requested".into()));
        }
        Ok(())
    }

    pub fn trends(&self) -> Vec<TrendFunction> {
        let mut v = vec![TrendFunction::Null; self.n];
        v[0] = self.scenario.first_trend();
        v
    }

    /// Seed of the shared Gaussian quantile table.
    pub fn quantile_seed(&self) -> u64 {
        derive_seed(self.seed, &[domain::QUANTILE_SEED])
    }
}

/// One row of a size or power table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    #[serde(rename = "T")]
    pub t_len: usize,
    pub n: usize,
    pub sigma: f64,
    pub scenario: String,
    pub alpha: f64,
    pub value: f64,
    #[serde(rename = "R")]
    pub reps: usize,
    pub seed: u64,
}

/// Outcome of one replication at one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RepOutcome {
    any_rejection: bool,
    detected: bool,
    spurious: bool,
}

fn simulate(cfg: &SimConfig) -> Result<Vec<Vec<RepOutcome>>> {
    cfg.validate()?;
    let pairs = PairSet::all(cfg.n)?;
    let family = IntervalFamily::<f64>::default_for(cfg.t_len)?;
    let table = QuantileTable::build(&pairs, &family, &cfg.alphas, cfg.draws, cfg.quantile_seed())?;
    let crit: Vec<Vec<f64>> = cfg
        .alphas
        .iter()
        .map(|&a| critical_values(&family, &table, a, cfg.mode))
        .collect::<Result<_>>()?;
    let trends = cfg.trends();
    (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let panel = generate_panel(&trends, cfg.t_len, cfg.sigma, cfg.seed, rep)?;
            let sigma_hat = overdispersion_pooled(&panel, &pairs)?.sigma_hat();
            let stats = all_statistics(&panel, &pairs, &family, sigma_hat)?;
            Ok(crit
                .iter()
                .map(|c| {
                    let mut out = RepOutcome {
                        any_rejection: false,
                        detected: false,
                        spurious: false,
                    };
                    for (p, &(i, _)) in pairs.pairs().iter().enumerate() {
                        let hit = stats
                            .row(p)
                            .iter()
                            .zip(c)
                            .any(|(s, &cv)| rejects(s.psi, cv));
                        if hit {
                            out.any_rejection = true;
                            if i == 0 {
                                out.detected = true;
                            } else {
                                out.spurious = true;
                            }
                        }
                    }
                    out
                })
                .collect())
        })
        .collect()
}

fn rows(
    cfg: &SimConfig,
    outcomes: &[Vec<RepOutcome>],
    hit: impl Fn(&RepOutcome) -> bool,
) -> Vec<TableRow> {
    cfg.alphas
        .iter()
        .enumerate()
        .map(|(a, &alpha)| {
            let count = outcomes.iter().filter(|o| hit(&o[a])).count();
            TableRow {
                t_len: cfg.t_len,
                n: cfg.n,
                sigma: cfg.sigma,
                scenario: cfg.scenario.label().into(),
                alpha,
                value: count as f64 / cfg.reps as f64,
                reps: cfg.reps,
                seed: cfg.seed,
            }
        })
        .collect()
}

/// Fraction of null replications with at least one rejection, per level.
pub fn run_size_experiment(cfg: &SimConfig) -> Result<Vec<TableRow>> {
    if cfg.scenario != Scenario::Null {
        return Err(Error::Config(
            "size experiments require the null scenario".into(),
        ));
    }
    let outcomes = simulate(cfg)?;
    Ok(rows(cfg, &outcomes, |o| o.any_rejection))
}

/// Fraction of replications where some pair involving the first series is
/// rejected and no pair among the remaining series is, per level.
pub fn run_power_experiment(cfg: &SimConfig) -> Result<Vec<TableRow>> {
    if cfg.scenario == Scenario::Null {
        return Err(Error::Config(
            "power experiments require scenario A or B".into(),
        ));
    }
    let outcomes = simulate(cfg)?;
    Ok(rows(cfg, &outcomes, |o| o.detected && !o.spurious))
}

pub const TABLE_COLUMNS: [&str; 8] = ["T", "n", "sigma", "scenario", "alpha", "value", "R", "seed"];

pub fn write_table_csv<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_COLUMNS)
        .and_then(|_| {
            rows.iter().try_for_each(|r| {
                w.write_record([
                    r.t_len.to_string(),
                    r.n.to_string(),
                    r.sigma.to_string(),
                    r.scenario.clone(),
                    r.alpha.to_string(),
                    format!("{:.4}", r.value),
                    r.reps.to_string(),
                    r.seed.to_string(),
                ])
            })
        })
        .map_err(|e| Error::Numeric(format!("csv: {e}")))?;
    w.flush().map_err(|e| Error::io("<table>", e))
}
