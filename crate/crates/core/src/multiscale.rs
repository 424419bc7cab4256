//! The multiscale test: estimate the overdispersion, evaluate every
//! (pair, interval) statistic, compare with calibrated critical values and
//! collect the rejected and minimal intervals per pair.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{minimal_intervals, Interval, IntervalFamily, StartRule};
use crate::quantile::{CriticalMode, QuantileTable, DEFAULT_DRAWS, MIN_DRAWS};
use crate::scalar::Scalar;
use crate::stats::{
    all_statistics, overdispersion_pooled, panel_length, CountSeries, OverdispersionEstimate,
    PairSet, StatisticMatrix,
};

/// Empirical quantile convention reported in results.
pub const QUANTILE_CONVENTION: &str = "ascending order statistic at rank ceil(N(1-alpha))";
/// Random number generation reported in results.
pub const RNG_DESCRIPTION: &str = "ChaCha8, one SplitMix-derived substream per draw";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilySpec {
    /// 7/14/21/28-day windows starting on days 1 + 7m and 4 + 7m.
    #[default]
    Default,
    Custom {
        lengths: Vec<usize>,
        starts: StartRule,
    },
}

impl FamilySpec {
    pub fn build<F: Scalar>(&self, t_len: usize) -> Result<IntervalFamily<F>> {
        match self {
            FamilySpec::Default => IntervalFamily::default_for(t_len),
            FamilySpec::Custom { lengths, starts } => {
                IntervalFamily::custom(t_len, lengths, starts)
            }
        }
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad `{key}` entry `{x}`")))
        })
        .collect()
}

/// `default`, or `;`-separated `key=list` items: `lengths=7,14`,
/// then either `starts=1,8,15` or `offsets=1,4` with optional `stride=7`.
impl std::str::FromStr for FamilySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "default" {
            return Ok(FamilySpec::Default);
        }
        let (mut lengths, mut starts, mut offsets, mut stride) = (None, None, None, None);
        for item in s.split(';').filter(|x| !x.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("family item `{item}` lacks `=`")))?;
            let k = k.trim();
            match k {
                "lengths" => lengths = Some(parse_list(k, v)?),
                "starts" => starts = Some(parse_list(k, v)?),
                "offsets" => offsets = Some(parse_list(k, v)?),
                "stride" => {
                    stride = Some(
                        v.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Config(format!("bad stride `{v}`")))?,
                    )
                }
                other => return Err(Error::Config(format!("unknown family key `{other}`"))),
            }
        }
        let lengths = lengths.unwrap_or_else(|| crate::interval::DEFAULT_LENGTHS.to_vec());
        let starts = match (starts, offsets) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `starts` or `offsets`, not both".into(),
                ))
            }
            (Some(v), None) => StartRule::Explicit(v),
            (None, offsets) => StartRule::Stride {
                offsets: offsets.unwrap_or_else(|| crate::interval::DEFAULT_OFFSETS.to_vec()),
                stride: stride.unwrap_or(crate::interval::DEFAULT_STRIDE),
            },
        };
        Ok(FamilySpec::Custom { lengths, starts })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSpec {
    /// Every `(i, j)` with `i < j`.
    #[default]
    All,
    Explicit(Vec<(usize, usize)>),
}

impl PairSpec {
    pub fn build(&self, n: usize) -> Result<PairSet> {
        match self {
            PairSpec::All => PairSet::all(n),
            PairSpec::Explicit(p) => {
                let set = PairSet::new(p.clone())?;
                if set.max_index() >= n {
                    return Err(Error::Config(format!(
                        "pair references series {}, but only {n} series were supplied",
                        set.max_index()
                    )));
                }
                Ok(set)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub mode: CriticalMode,
    pub draws: usize,
    pub seed: u64,
    pub family: FamilySpec,
    pub pairs: PairSpec,
    /// Directory holding quantile cache files; `None` disables caching.
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            alpha: 0.05,
            mode: CriticalMode::Scale,
            draws: DEFAULT_DRAWS,
            seed: 1,
            family: FamilySpec::Default,
            pairs: PairSpec::All,
            cache_dir: None,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.draws < MIN_DRAWS {
            return Err(Error::Config(format!(
                "at least {MIN_DRAWS} Monte Carlo draws are required, got {}",
                self.draws
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleRecord<F> {
    pub start: usize,
    pub length: usize,
    pub psi: F,
    pub critical: F,
    pub reject: bool,
    pub degenerate: bool,
}

impl<F> TripleRecord<F> {
    pub fn interval(&self) -> Interval {
        Interval::new(self.start, self.length)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult<F> {
    pub i: usize,
    pub j: usize,
    pub unit_i: String,
    pub unit_j: String,
    pub triples: Vec<TripleRecord<F>>,
    pub rejected: Vec<Interval>,
    pub minimal: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileInfo<F> {
    pub mode: CriticalMode,
    pub alpha: f64,
    pub q: F,
    pub seed: u64,
    #[serde(rename = "N")]
    pub draws: usize,
    pub convention: String,
    pub rng: String,
    pub table_shared: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResultSet<F> {
    pub t_len: usize,
    pub alpha: f64,
    pub mode: CriticalMode,
    pub sigma_hat: F,
    pub overdispersion: OverdispersionEstimate<F>,
    pub quantiles: QuantileInfo<F>,
    pub pairs: Vec<PairResult<F>>,
    pub degenerate_triples: usize,
    pub warnings: Vec<String>,
}

impl<F: Scalar> TestResultSet<F> {
    pub fn any_rejection(&self) -> bool {
        self.pairs.iter().any(|p| !p.rejected.is_empty())
    }

    pub fn rejection_count(&self) -> usize {
        self.pairs.iter().map(|p| p.rejected.len()).sum()
    }

    pub fn pair(&self, unit_i: &str, unit_j: &str) -> Option<&PairResult<F>> {
        self.pairs.iter().find(|p| {
            (p.unit_i == unit_i && p.unit_j == unit_j) || (p.unit_i == unit_j && p.unit_j == unit_i)
        })
    }
}

/// Critical value of every interval of `family` at level `alpha`.
pub fn critical_values<F: Scalar>(
    family: &IntervalFamily<F>,
    table: &QuantileTable<F>,
    alpha: f64,
    mode: CriticalMode,
) -> Result<Vec<F>> {
    let q = table.quantile(alpha, mode)?;
    Ok(match mode {
        CriticalMode::Uniform => vec![q; family.len()],
        CriticalMode::Scale => family.scales().iter().map(|s| s.b + q / s.a).collect(),
    })
}

/// `|psi| > critical`, strictly.
#[inline]
pub fn rejects<F: Scalar>(psi: F, critical: F) -> bool {
    psi.abs() > critical
}

/// Full test, building (or loading) the quantile table for this geometry.
pub fn run_test<F: Scalar>(
    data: &[CountSeries<F>],
    config: &TestConfig,
) -> Result<TestResultSet<F>> {
    config.validate()?;
    let pairs = config.pairs.build(data.len())?;
    let t_len = panel_length(data, &pairs)?;
    let family = config.family.build::<F>(t_len)?;
    let table = match &config.cache_dir {
        Some(dir) => {
            QuantileTable::load_or_build(
                dir,
                &pairs,
                &family,
                &[config.alpha],
                config.draws,
                config.seed,
            )?
            .0
        }
        None => QuantileTable::build(&pairs, &family, &[config.alpha], config.draws, config.seed)?,
    };
    run_test_with_table(data, config.alpha, config.mode, &pairs, &family, &table)
}

/// Test with a precomputed table, as used by the simulation study where one
/// table serves every replication.
pub fn run_test_with_table<F: Scalar>(
    data: &[CountSeries<F>],
    alpha: f64,
    mode: CriticalMode,
    pairs: &PairSet,
    family: &IntervalFamily<F>,
    table: &QuantileTable<F>,
) -> Result<TestResultSet<F>> {
    let t_len = panel_length(data, pairs)?;
    if t_len < 7 {
        return Err(Error::NoAdmissibleInterval(format!(
            "series length {t_len} is below 7 days"
        )));
    }
    let geometry = crate::quantile::Geometry::new(pairs, family);
    if geometry != table.geometry {
        return Err(Error::Config(
            "quantile table was built for a different geometry".into(),
        ));
    }
    let overdispersion = overdispersion_pooled(data, pairs)?;
    let sigma_hat = overdispersion.sigma_hat();
    let stats = all_statistics(data, pairs, family, sigma_hat)?;
    let crit = critical_values(family, table, alpha, mode)?;
    let q = table.quantile(alpha, mode)?;

    let mut warnings = Vec::new();
    if let Some(c) = crit.iter().find(|c| **c <= F::zero()) {
        warnings.push(format!(
            "non-positive critical value {c}: degenerate triples could be rejected"
        ));
    }
    let pair_results = assemble(data, pairs, family, &stats, &crit);
    let degenerate_triples = stats.iter().filter(|s| s.degenerate).count();
    if degenerate_triples > 0 {
        warnings.push(format!(
            "{degenerate_triples} triple(s) have zero counts on the whole interval; statistic set to 0"
        ));
    }
    Ok(TestResultSet {
        t_len,
        alpha,
        mode,
        sigma_hat,
        overdispersion,
        quantiles: QuantileInfo {
            mode,
            alpha,
            q,
            seed: table.seed,
            draws: table.draws,
            convention: QUANTILE_CONVENTION.into(),
            rng: RNG_DESCRIPTION.into(),
            table_shared: false,
        },
        pairs: pair_results,
        degenerate_triples,
        warnings,
    })
}

fn assemble<F: Scalar>(
    data: &[CountSeries<F>],
    pairs: &PairSet,
    family: &IntervalFamily<F>,
    stats: &StatisticMatrix<F>,
    crit: &[F],
) -> Vec<PairResult<F>> {
    pairs
        .pairs()
        .iter()
        .enumerate()
        .map(|(p, &(i, j))| {
            let triples: Vec<TripleRecord<F>> = family
                .intervals()
                .iter()
                .zip(stats.row(p))
                .zip(crit)
                .map(|((iv, s), &c)| TripleRecord {
                    start: iv.start,
                    length: iv.length,
                    psi: s.psi,
                    critical: c,
                    reject: rejects(s.psi, c),
                    degenerate: s.degenerate,
                })
                .collect();
            let rejected: Vec<Interval> = triples
                .iter()
                .filter(|t| t.reject)
                .map(TripleRecord::interval)
                .collect();
            let minimal = minimal_intervals(&rejected);
            PairResult {
                i,
                j,
                unit_i: data[i].id.clone(),
                unit_j: data[j].id.clone(),
                triples,
                rejected,
                minimal,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub unit_i: String,
    pub unit_j: String,
    pub rejected: Vec<Interval>,
    pub minimal: Vec<Interval>,
    pub statement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub alpha: f64,
    pub any_rejection: bool,
    pub statement: String,
    /// Every critical value is positive, so triples with a zero statistic
    /// can never be rejected.
    pub degenerate_never_rejected: bool,
    pub pairs: Vec<PairSummary>,
}

fn format_intervals(v: &[Interval]) -> String {
    v.iter()
        .map(|iv| iv.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Per-pair rejected and minimal intervals with the matching simultaneous
/// confidence statements.
pub fn fwer_decision_summary<F: Scalar>(results: &TestResultSet<F>) -> DecisionSummary {
    let alpha = results.alpha;
    let confidence = format!("{}", (1.0 - alpha) * 100.0);
    let confidence = confidence.trim_end_matches(".0");
    let pairs: Vec<PairSummary> = results
        .pairs
        .iter()
        .map(|p| {
            let statement = if p.rejected.is_empty() {
                format!(
                    "no differences detected between {} and {} at level {alpha}",
                    p.unit_i, p.unit_j
                )
            } else {
                format!(
                    "with probability at least {confidence}%, the trends of {} and {} differ on each of the intervals {} (minimal: {})",
                    p.unit_i,
                    p.unit_j,
                    format_intervals(&p.rejected),
                    format_intervals(&p.minimal)
                )
            };
            PairSummary {
                unit_i: p.unit_i.clone(),
                unit_j: p.unit_j.clone(),
                rejected: p.rejected.clone(),
                minimal: p.minimal.clone(),
                statement,
            }
        })
        .collect();
    let any_rejection = results.any_rejection();
    let statement = if any_rejection {
        format!(
            "with probability at least {confidence}%, the trends differ on every rejected interval of every pair simultaneously"
        )
    } else {
        format!("no differences detected at level {alpha}")
    };
    let degenerate_never_rejected = results
        .pairs
        .iter()
        .flat_map(|p| &p.triples)
        .all(|t| t.critical > F::zero());
    DecisionSummary {
        alpha,
        any_rejection,
        statement,
        degenerate_never_rejected,
        pairs,
    }
}
