//! Candidate time windows and their per-scale calibration constants.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Window lengths (in days) of the default family: one to four weeks.
pub const DEFAULT_LENGTHS: [usize; 4] = [7, 14, 21, 28];
/// First start days of the two interleaved weekly start grids.
pub const DEFAULT_OFFSETS: [usize; 2] = [1, 4];
pub const DEFAULT_STRIDE: usize = 7;

/// A window of consecutive days `[start, start + length - 1]`, 1-based.
///
/// Intervals order by (length, start).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub length: usize,
}

impl Ord for Interval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.length, self.start).cmp(&(other.length, other.start))
    }
}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Interval {
    pub fn new(start: usize, length: usize) -> Self {
        Interval { start, length }
    }

    /// Last member day (inclusive).
    pub fn end(&self) -> usize {
        self.start + self.length - 1
    }

    pub fn contains_day(&self, t: usize) -> bool {
        self.start <= t && t <= self.end()
    }

    pub fn fits(&self, t_len: usize) -> bool {
        self.length >= 1 && self.start >= 1 && self.end() <= t_len
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.start <= self.start && self.end() <= other.end()
    }

    pub fn is_proper_subset_of(&self, other: &Interval) -> bool {
        self != other && self.is_subset_of(other)
    }

    /// Rescaled length `length / T`.
    pub fn rescaled_length<F: Scalar>(&self, t_len: usize) -> F {
        F::from_usize_lossy(self.length) / F::from_usize_lossy(t_len)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end())
    }
}

/// Calibration constants attached to one interval of a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConstants<F> {
    pub h: F,
    pub a: F,
    pub b: F,
}

/// `a(h) = sqrt(log(e/h)) / log log(e^e/h)` and `b(h) = sqrt(2 log(1/h))`.
///
/// Both are evaluated through `log(e/h) = 1 - log h` and
/// `log(e^e/h) = e - log h`, which keeps `h = 1` exact: `(1, 0)`.
pub fn scale_constants<F: Scalar>(h: F) -> Result<(F, F)> {
    if !(h > F::zero() && h <= F::one()) {
        return Err(Error::Domain(format!(
            "rescaled interval length must lie in (0, 1], got {h}"
        )));
    }
    let log_h = h.ln();
    let e = F::lit(std::f64::consts::E);
    let a = (F::one() - log_h).sqrt() / (e - log_h).ln();
    let b = (F::zero() - (F::one() + F::one()) * log_h).sqrt();
    Ok((a, b))
}

/// How start days are generated for each window length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartRule {
    /// Use exactly these start days.
    Explicit(Vec<usize>),
    /// Starts `offset + stride * m` for every offset and `m = 0, 1, ...`.
    Stride { offsets: Vec<usize>, stride: usize },
}

impl Default for StartRule {
    fn default() -> Self {
        StartRule::Stride {
            offsets: DEFAULT_OFFSETS.to_vec(),
            stride: DEFAULT_STRIDE,
        }
    }
}

impl StartRule {
    fn starts(&self, t_len: usize) -> Result<Vec<usize>> {
        match self {
            StartRule::Explicit(v) => Ok(v.clone()),
            StartRule::Stride { offsets, stride } => {
                if *stride == 0 {
                    return Err(Error::Config("start stride must be >= 1".into()));
                }
                let mut out = Vec::new();
                for &off in offsets {
                    let mut s = off;
                    while s <= t_len {
                        out.push(s);
                        s += stride;
                    }
                }
                Ok(out)
            }
        }
    }
}

/// The family of candidate windows for one series length `T`.
///
/// Intervals are distinct and ordered by (length, start); `scales[k]`
/// belongs to `intervals[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalFamily<F> {
    t_len: usize,
    intervals: Vec<Interval>,
    scales: Vec<ScaleConstants<F>>,
}

impl<F: Scalar> IntervalFamily<F> {
    /// Windows of 7, 14, 21 and 28 days starting on days `1 + 7m` and
    /// `4 + 7m`; windows that run past day `T` are dropped.
    pub fn default_for(t_len: usize) -> Result<Self> {
        if t_len < DEFAULT_LENGTHS[0] {
            return Err(Error::NoAdmissibleInterval(format!(
                "series length {t_len} is shorter than the shortest window ({} days)",
                DEFAULT_LENGTHS[0]
            )));
        }
        Self::custom(t_len, &DEFAULT_LENGTHS, &StartRule::default())
    }

    /// Same fitting, deduplication and ordering rules as [`default_for`],
    /// with caller supplied lengths and start rule. Lengths longer than
    /// `T` are skipped.
    ///
    /// [`default_for`]: IntervalFamily::default_for
    pub fn custom(t_len: usize, lengths: &[usize], rule: &StartRule) -> Result<Self> {
        if lengths.contains(&0) {
            return Err(Error::Config("interval lengths must be >= 1".into()));
        }
        let starts = rule.starts(t_len)?;
        if starts.contains(&0) {
            return Err(Error::Config("start days are 1-based".into()));
        }
        let set: BTreeSet<Interval> = lengths
            .iter()
            .flat_map(|&d| starts.iter().map(move |&s| Interval::new(s, d)))
            .filter(|iv| iv.fits(t_len))
            .collect();
        if set.is_empty() {
            return Err(Error::NoAdmissibleInterval(format!(
                "no window of lengths {lengths:?} fits into {t_len} days"
            )));
        }
        Self::from_intervals(t_len, set.into_iter().collect())
    }

    fn from_intervals(t_len: usize, intervals: Vec<Interval>) -> Result<Self> {
        let scales = intervals
            .iter()
            .map(|iv| {
                let h = iv.rescaled_length::<F>(t_len);
                scale_constants(h).map(|(a, b)| ScaleConstants { h, a, b })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(IntervalFamily {
            t_len,
            intervals,
            scales,
        })
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn scales(&self) -> &[ScaleConstants<F>] {
        &self.scales
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Interval, &ScaleConstants<F>)> {
        self.intervals.iter().zip(self.scales.iter())
    }

    /// Distinct window lengths, ascending.
    pub fn lengths(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.intervals.iter().map(|iv| iv.length).collect();
        set.into_iter().collect()
    }

    /// Stable textual description used for cache keys.
    pub fn fingerprint(&self) -> String {
        let mut s = format!("T={};", self.t_len);
        for iv in &self.intervals {
            s.push_str(&format!("{}+{};", iv.start, iv.length));
        }
        s
    }
}

/// Intervals of `rejected` that contain no other member as a proper subset.
///
/// Output keeps the input order and drops duplicates.
pub fn minimal_intervals(rejected: &[Interval]) -> Vec<Interval> {
    let mut seen = BTreeSet::new();
    rejected
        .iter()
        .filter(|iv| !rejected.iter().any(|other| other.is_proper_subset_of(iv)))
        .filter(|iv| seen.insert(**iv))
        .copied()
        .collect()
}
