//! Monte Carlo calibration of the critical values.
//!
//! Each draw replaces the data by an i.i.d. standard normal panel, builds
//! the Gaussian analogue of every interval statistic and records two
//! maxima: the scale-weighted one (`max a_k (|phi| - b_k)`) and the plain
//! one (`max |phi|`). The empirical `(1 - alpha)` quantiles of those maxima
//! give the scale-dependent and the uniform critical values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::interval::{scale_constants, IntervalFamily};
use crate::rng::{domain, substream};
use crate::scalar::Scalar;
use crate::stats::{prefix_sums, window_sum, PairSet};

pub const DEFAULT_DRAWS: usize = 5000;
pub const MIN_DRAWS: usize = 100;

const CACHE_MAGIC: &str = "multiscale-trends quantile cache";
const CACHE_VERSION: u32 = 1;

/// Which critical values are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalMode {
    /// `b_k + q / a_k`, growing for shorter windows.
    #[default]
    Scale,
    /// One common critical value for every interval.
    Uniform,
}

impl std::str::FromStr for CriticalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scale" => Ok(CriticalMode::Scale),
            "uniform" => Ok(CriticalMode::Uniform),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected `scale` or `uniform`)"
            ))),
        }
    }
}

impl std::fmt::Display for CriticalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CriticalMode::Scale => "scale",
            CriticalMode::Uniform => "uniform",
        })
    }
}

/// Everything the law of the Gaussian maxima depends on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub t_len: usize,
    pub n_countries: usize,
    pub n_pairs: usize,
    pub n_intervals: usize,
    /// SHA-256 over pairs, family and scalar precision.
    pub key: String,
}

impl Geometry {
    pub fn new<F: Scalar>(pairs: &PairSet, family: &IntervalFamily<F>) -> Self {
        let mut h = Sha256::new();
        h.update(F::PRECISION.as_bytes());
        h.update(b"|");
        h.update(pairs.fingerprint().as_bytes());
        h.update(b"|");
        h.update(family.fingerprint().as_bytes());
        let key = h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        Geometry {
            t_len: family.t_len(),
            n_countries: pairs.countries().len(),
            n_pairs: pairs.len(),
            n_intervals: family.len(),
            key,
        }
    }
}

/// The two maxima produced by one Gaussian panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMax<F> {
    pub scaled: F,
    pub plain: F,
}

/// Precomputed layout for repeated draws on one geometry.
struct DrawPlan<'a, F> {
    t_len: usize,
    n_countries: usize,
    /// `(slot_i, slot_j)` into the panel for every pair.
    slots: Vec<(usize, usize)>,
    family: &'a IntervalFamily<F>,
    /// `(2 T h_k)^{-1/2} = (2 d_k)^{-1/2}`.
    norm: Vec<F>,
}

impl<'a, F: Scalar> DrawPlan<'a, F> {
    fn new(pairs: &PairSet, family: &'a IntervalFamily<F>) -> Self {
        let countries = pairs.countries();
        let slot = |c: usize| countries.binary_search(&c).expect("country in C");
        DrawPlan {
            t_len: family.t_len(),
            n_countries: countries.len(),
            slots: pairs
                .pairs()
                .iter()
                .map(|&(i, j)| (slot(i), slot(j)))
                .collect(),
            family,
            norm: family
                .intervals()
                .iter()
                .map(|iv| F::one() / (F::lit(2.0) * F::from_usize_lossy(iv.length)).sqrt())
                .collect(),
        }
    }

    /// One shared panel `Z_it`, then both maxima over all triples.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, prefix: &mut Vec<Vec<F>>) -> GaussianMax<F> {
        let mut z = vec![F::zero(); self.t_len];
        prefix.clear();
        for _ in 0..self.n_countries {
            for v in z.iter_mut() {
                *v = F::standard_normal(rng);
            }
            prefix.push(prefix_sums(&z));
        }
        let mut scaled = F::neg_infinity();
        let mut plain = F::zero();
        for &(si, sj) in &self.slots {
            let (pi, pj) = (&prefix[si], &prefix[sj]);
            for ((iv, sc), &nrm) in self.family.iter().zip(&self.norm) {
                let phi = ((window_sum(pi, iv) - window_sum(pj, iv)) * nrm).abs();
                plain = plain.max(phi);
                scaled = scaled.max(sc.a * (phi - sc.b));
            }
        }
        GaussianMax { scaled, plain }
    }
}

/// One draw of the scale-weighted and the plain Gaussian maximum.
pub fn draw_gaussian_max<F: Scalar, R: Rng + ?Sized>(
    pairs: &PairSet,
    family: &IntervalFamily<F>,
    rng: &mut R,
) -> GaussianMax<F> {
    DrawPlan::new(pairs, family).draw(rng, &mut Vec::new())
}

/// The Gaussian statistics `phi_ijk` of a single draw, row-major by pair.
/// Used by diagnostics that need the full vector rather than its maxima.
pub fn draw_gaussian_statistics<F: Scalar, R: Rng + ?Sized>(
    pairs: &PairSet,
    family: &IntervalFamily<F>,
    rng: &mut R,
) -> Vec<F> {
    let plan = DrawPlan::new(pairs, family);
    let mut z = vec![F::zero(); plan.t_len];
    let prefix: Vec<Vec<F>> = (0..plan.n_countries)
        .map(|_| {
            for v in z.iter_mut() {
                *v = F::standard_normal(rng);
            }
            prefix_sums(&z)
        })
        .collect();
    plan.slots
        .iter()
        .flat_map(|&(si, sj)| {
            let (pi, pj) = (&prefix[si], &prefix[sj]);
            family
                .intervals()
                .iter()
                .zip(&plan.norm)
                .map(move |(iv, &nrm)| (window_sum(pi, iv) - window_sum(pj, iv)) * nrm)
        })
        .collect()
}

/// Rank (1-based) of the empirical `(1 - alpha)` quantile among `n` sorted
/// values: `ceil(n (1 - alpha)) = n - floor(n alpha)`.
pub fn quantile_rank(n: usize, alpha: f64) -> usize {
    let below = (n as f64 * alpha + 1e-9).floor() as usize;
    n.saturating_sub(below).clamp(1, n)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Monte Carlo quantiles of both Gaussian maxima for one geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable<F> {
    pub geometry: Geometry,
    pub draws: usize,
    pub seed: u64,
    pub alphas: Vec<f64>,
    pub q_scale: Vec<F>,
    pub q_uniform: Vec<F>,
    #[serde(skip)]
    sorted_scale: Vec<F>,
    #[serde(skip)]
    sorted_uniform: Vec<F>,
}

impl<F: Scalar> QuantileTable<F> {
    /// Simulates `draws` panels (in parallel, one substream per draw index)
    /// and records the requested quantiles.
    pub fn build(
        pairs: &PairSet,
        family: &IntervalFamily<F>,
        alphas: &[f64],
        draws: usize,
        seed: u64,
    ) -> Result<Self> {
        if draws < MIN_DRAWS {
            return Err(Error::Config(format!(
                "at least {MIN_DRAWS} Monte Carlo draws are required, got {draws}"
            )));
        }
        alphas.iter().try_for_each(|&a| check_alpha(a))?;
        let plan = DrawPlan::new(pairs, family);
        let maxima: Vec<GaussianMax<F>> = (0..draws as u64)
            .into_par_iter()
            .map_init(Vec::new, |buf, l| {
                let mut rng = substream(seed, &[domain::GAUSS_DRAW, l]);
                plan.draw(&mut rng, buf)
            })
            .collect();
        let mut sorted_scale: Vec<F> = maxima.iter().map(|m| m.scaled).collect();
        let mut sorted_uniform: Vec<F> = maxima.iter().map(|m| m.plain).collect();
        sorted_scale.sort_by(|a, b| a.partial_cmp(b).expect("finite draw"));
        sorted_uniform.sort_by(|a, b| a.partial_cmp(b).expect("finite draw"));
        Self::from_sorted(
            Geometry::new(pairs, family),
            seed,
            alphas,
            sorted_scale,
            sorted_uniform,
        )
    }

    fn from_sorted(
        geometry: Geometry,
        seed: u64,
        alphas: &[f64],
        sorted_scale: Vec<F>,
        sorted_uniform: Vec<F>,
    ) -> Result<Self> {
        let draws = sorted_scale.len();
        if draws == 0 || sorted_uniform.len() != draws {
            return Err(Error::Numeric("quantile table without draws".into()));
        }
        if sorted_scale
            .iter()
            .chain(&sorted_uniform)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numeric("non-finite Gaussian maximum".into()));
        }
        let pick = |v: &[F], a: f64| v[quantile_rank(draws, a) - 1];
        Ok(QuantileTable {
            geometry,
            draws,
            seed,
            alphas: alphas.to_vec(),
            q_scale: alphas.iter().map(|&a| pick(&sorted_scale, a)).collect(),
            q_uniform: alphas.iter().map(|&a| pick(&sorted_uniform, a)).collect(),
            sorted_scale,
            sorted_uniform,
        })
    }

    /// Sorted draws of the scale-weighted (`Scale`) or plain maximum.
    pub fn sorted_draws(&self, mode: CriticalMode) -> &[F] {
        match mode {
            CriticalMode::Scale => &self.sorted_scale,
            CriticalMode::Uniform => &self.sorted_uniform,
        }
    }

    /// Stored quantile for `alpha`; no interpolation between levels.
    pub fn quantile(&self, alpha: f64, mode: CriticalMode) -> Result<F> {
        let idx = self
            .alphas
            .iter()
            .position(|&a| a == alpha)
            .ok_or_else(|| {
                Error::Config(format!(
                    "alpha {alpha} was not precomputed (table holds {:?})",
                    self.alphas
                ))
            })?;
        Ok(match mode {
            CriticalMode::Scale => self.q_scale[idx],
            CriticalMode::Uniform => self.q_uniform[idx],
        })
    }

    /// Same draws, another set of levels.
    pub fn with_alphas(&self, alphas: &[f64]) -> Result<Self> {
        alphas.iter().try_for_each(|&a| check_alpha(a))?;
        Self::from_sorted(
            self.geometry.clone(),
            self.seed,
            alphas,
            self.sorted_scale.clone(),
            self.sorted_uniform.clone(),
        )
    }

    pub fn cache_file_name(geometry: &Geometry, seed: u64, draws: usize) -> String {
        format!("{}-s{seed}-n{draws}.qtab", &geometry.key[..32])
    }

    /// Versioned header, seed, draw count and the two sorted draw vectors.
    pub fn to_cache_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CACHE_MAGIC} v{CACHE_VERSION}");
        let _ = writeln!(s, "geometry {}", self.geometry.key);
        let _ = writeln!(
            s,
            "shape T={} countries={} pairs={} intervals={}",
            self.geometry.t_len,
            self.geometry.n_countries,
            self.geometry.n_pairs,
            self.geometry.n_intervals
        );
        let _ = writeln!(s, "precision {}", F::PRECISION);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "draws {}", self.draws);
        for (name, v) in [
            ("scale", &self.sorted_scale),
            ("uniform", &self.sorted_uniform),
        ] {
            let _ = writeln!(s, "{name}");
            for x in v.iter() {
                let _ = writeln!(s, "{x}");
            }
        }
        s
    }

    /// Parses a cache file; fails unless geometry, seed and draw count
    /// match the expectation exactly.
    pub fn from_cache_str(
        text: &str,
        expect: &Geometry,
        seed: u64,
        draws: usize,
        alphas: &[f64],
        path: &Path,
    ) -> Result<Self> {
        let bad = |reason: String| Error::Cache {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        fn header<'t>(
            lines: &mut impl Iterator<Item = &'t str>,
            want: &str,
        ) -> std::result::Result<String, String> {
            let line = lines.next().ok_or_else(|| format!("missing `{want}`"))?;
            line.strip_prefix(want)
                .map(|r| r.trim().to_string())
                .ok_or_else(|| format!("expected `{want}`, found `{line}`"))
        }
        let mut field = |want: &str| header(&mut lines, want).map_err(bad);
        let version = field(CACHE_MAGIC)?;
        if version != format!("v{CACHE_VERSION}") {
            return Err(bad(format!("unsupported version {version}")));
        }
        if field("geometry")? != expect.key {
            return Err(bad("geometry mismatch".into()));
        }
        field("shape")?;
        if field("precision")? != F::PRECISION {
            return Err(bad("precision mismatch".into()));
        }
        if field("seed")? != seed.to_string() {
            return Err(bad("seed mismatch".into()));
        }
        if field("draws")? != draws.to_string() {
            return Err(bad("draw count mismatch".into()));
        }
        let mut section = |name: &str| -> Result<Vec<F>> {
            header(&mut lines, name).map_err(bad)?;
            (0..draws)
                .map(|_| {
                    let line = lines.next().ok_or_else(|| bad("truncated draws".into()))?;
                    line.trim()
                        .parse::<f64>()
                        .map(F::lit)
                        .map_err(|e| bad(format!("bad value `{line}`: {e}")))
                })
                .collect()
        };
        let sorted_scale = section("scale")?;
        let sorted_uniform = section("uniform")?;
        alphas.iter().try_for_each(|&a| check_alpha(a))?;
        Self::from_sorted(expect.clone(), seed, alphas, sorted_scale, sorted_uniform)
    }

    /// Reads the table from `dir` when a matching cache file exists,
    /// otherwise simulates it and writes the file.
    pub fn load_or_build(
        dir: &Path,
        pairs: &PairSet,
        family: &IntervalFamily<F>,
        alphas: &[f64],
        draws: usize,
        seed: u64,
    ) -> Result<(Self, CacheStatus)> {
        let geometry = Geometry::new(pairs, family);
        let path = dir.join(Self::cache_file_name(&geometry, seed, draws));
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(t) = Self::from_cache_str(&text, &geometry, seed, draws, alphas, &path) {
                return Ok((t, CacheStatus::Hit(path)));
            }
        }
        let table = Self::build(pairs, family, alphas, draws, seed)?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::io::write_atomic(&path, table.to_cache_string().as_bytes())?;
        Ok((table, CacheStatus::Written(path)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheStatus {
    Hit(PathBuf),
    Written(PathBuf),
}

/// `b(h) + q / a(h)` in scale mode, the plain quantile in uniform mode.
pub fn critical_value<F: Scalar>(
    table: &QuantileTable<F>,
    alpha: f64,
    h: F,
    mode: CriticalMode,
) -> Result<F> {
    let q = table.quantile(alpha, mode)?;
    match mode {
        CriticalMode::Uniform => Ok(q),
        CriticalMode::Scale => {
            let (a, b) = scale_constants(h)?;
            Ok(b + q / a)
        }
    }
}
