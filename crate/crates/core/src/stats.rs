//! Overdispersion estimation, normalized interval statistics and
//! rectangular-kernel trend smoothing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalFamily};
use crate::scalar::Scalar;

/// One unit's aligned daily counts, `values[t - 1]` holding day `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSeries<F> {
    pub id: String,
    values: Vec<F>,
}

impl<F: Scalar> CountSeries<F> {
    pub fn new(id: impl Into<String>, values: Vec<F>) -> Result<Self> {
        let id = id.into();
        if let Some((t, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < F::zero())
        {
            return Err(Error::InvalidSeries {
                id,
                reason: format!(
                    "day {} has value {v}; counts must be finite and >= 0",
                    t + 1
                ),
            });
        }
        Ok(CountSeries { id, values })
    }

    pub fn from_counts(id: impl Into<String>, counts: &[u64]) -> Self {
        CountSeries {
            id: id.into(),
            values: counts.iter().map(|&c| F::lit(c as f64)).collect(),
        }
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `c * X` for every observation.
    pub fn scaled(&self, c: F) -> Self {
        CountSeries {
            id: self.id.clone(),
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }

    /// Running sums with a leading zero: `prefix[t] = X_1 + ... + X_t`.
    pub(crate) fn prefix_sums(&self) -> Vec<F> {
        prefix_sums(&self.values)
    }
}

pub(crate) fn prefix_sums<F: Scalar>(values: &[F]) -> Vec<F> {
    let mut out = Vec::with_capacity(values.len() + 1);
    let mut acc = F::zero();
    out.push(acc);
    for &v in values {
        acc = acc + v;
        out.push(acc);
    }
    out
}

#[inline]
pub(crate) fn window_sum<F: Scalar>(prefix: &[F], iv: &Interval) -> F {
    prefix[iv.end()] - prefix[iv.start - 1]
}

/// Ordered pairs `(i, j)` with `i < j` to be compared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSet {
    pairs: Vec<(usize, usize)>,
}

impl PairSet {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Config("pair set is empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j) in &pairs {
            if i >= j {
                return Err(Error::Config(format!("pair ({i}, {j}) must satisfy i < j")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::Config(format!("duplicate pair ({i}, {j})")));
            }
        }
        Ok(PairSet { pairs })
    }

    /// Every `(i, j)` with `0 <= i < j < n`, lexicographic.
    pub fn all(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewSeries { need: 2, got: n });
        }
        Self::new(
            (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
        )
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Indices appearing in at least one pair, ascending.
    pub fn countries(&self) -> Vec<usize> {
        let set: std::collections::BTreeSet<usize> =
            self.pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
        set.into_iter().collect()
    }

    pub fn max_index(&self) -> usize {
        self.pairs.iter().map(|&(_, j)| j).max().unwrap_or(0)
    }

    pub fn fingerprint(&self) -> String {
        self.pairs
            .iter()
            .map(|(i, j)| format!("{i}-{j}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Pooled overdispersion estimate over the compared units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverdispersionEstimate<F> {
    pub sigma_hat_sq: F,
    /// `(series id, per-series estimate)` in ascending index order.
    pub per_series: Vec<(String, F)>,
}

impl<F: Scalar> OverdispersionEstimate<F> {
    pub fn sigma_hat(&self) -> F {
        self.sigma_hat_sq.sqrt()
    }
}

/// Half the summed squared first differences over the total count.
pub fn overdispersion_single<F: Scalar>(series: &CountSeries<F>) -> Result<F> {
    let x = series.values();
    if x.len() < 2 {
        return Err(Error::SeriesTooShort {
            id: series.id.clone(),
            len: x.len(),
        });
    }
    let total: F = x.iter().copied().sum();
    if total <= F::zero() {
        return Err(Error::AllZeroSeries {
            id: series.id.clone(),
        });
    }
    let ssd: F = x.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    Ok(ssd / ((F::one() + F::one()) * total))
}

/// Mean of the per-series estimates over the units that appear in `pairs`.
pub fn overdispersion_pooled<F: Scalar>(
    data: &[CountSeries<F>],
    pairs: &PairSet,
) -> Result<OverdispersionEstimate<F>> {
    let countries = pairs.countries();
    if let Some(&i) = countries.iter().find(|&&i| i >= data.len()) {
        return Err(Error::Config(format!(
            "pair references series {i}, but only {} series were supplied",
            data.len()
        )));
    }
    let per_series = countries
        .iter()
        .map(|&i| overdispersion_single(&data[i]).map(|v| (data[i].id.clone(), v)))
        .collect::<Result<Vec<_>>>()?;
    let sum: F = per_series.iter().map(|(_, v)| *v).sum();
    Ok(OverdispersionEstimate {
        sigma_hat_sq: sum / F::from_usize_lossy(per_series.len()),
        per_series,
    })
}

/// Value of the normalized statistic for one (pair, interval) triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStatistic<F> {
    pub psi: F,
    /// Both series are zero on the whole interval; `psi` is then 0.
    pub degenerate: bool,
}

#[inline]
fn normalized<F: Scalar>(diff: F, total: F, sigma_hat: F) -> PairStatistic<F> {
    if total <= F::zero() {
        PairStatistic {
            psi: F::zero(),
            degenerate: true,
        }
    } else {
        PairStatistic {
            psi: diff / (sigma_hat * total.sqrt()),
            degenerate: false,
        }
    }
}

fn check_sigma<F: Scalar>(sigma_hat: F) -> Result<()> {
    if sigma_hat > F::zero() && sigma_hat.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "overdispersion estimate must be positive and finite, got {sigma_hat}"
        )))
    }
}

/// `sum (X_i - X_j) / (sigma_hat * sqrt(sum (X_i + X_j)))` over the days of `ival`.
pub fn pair_statistic<F: Scalar>(
    x_i: &CountSeries<F>,
    x_j: &CountSeries<F>,
    ival: &Interval,
    sigma_hat: F,
) -> Result<PairStatistic<F>> {
    check_sigma(sigma_hat)?;
    if x_i.len() != x_j.len() {
        return Err(Error::LengthMismatch {
            id: x_j.id.clone(),
            expected: x_i.len(),
            found: x_j.len(),
        });
    }
    if !ival.fits(x_i.len()) {
        return Err(Error::Config(format!(
            "interval {ival} does not fit into {} days",
            x_i.len()
        )));
    }
    let days = ival.start - 1..ival.end();
    let a: F = x_i.values()[days.clone()].iter().copied().sum();
    let b: F = x_j.values()[days].iter().copied().sum();
    Ok(normalized(a - b, a + b, sigma_hat))
}

/// Statistics for every (pair, interval), row-major by pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticMatrix<F> {
    n_pairs: usize,
    n_intervals: usize,
    values: Vec<PairStatistic<F>>,
}

impl<F: Scalar> StatisticMatrix<F> {
    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    /// Number of simultaneous hypotheses, `|S| * K`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, pair: usize, interval: usize) -> PairStatistic<F> {
        self.values[pair * self.n_intervals + interval]
    }

    pub fn row(&self, pair: usize) -> &[PairStatistic<F>] {
        &self.values[pair * self.n_intervals..(pair + 1) * self.n_intervals]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PairStatistic<F>> {
        self.values.iter()
    }
}

/// Checks that `data` is a usable panel for `pairs` and returns `T`.
pub(crate) fn panel_length<F: Scalar>(data: &[CountSeries<F>], pairs: &PairSet) -> Result<usize> {
    if data.len() < 2 {
        return Err(Error::TooFewSeries {
            need: 2,
            got: data.len(),
        });
    }
    let t_len = data[0].len();
    if let Some(s) = data.iter().find(|s| s.len() != t_len) {
        return Err(Error::LengthMismatch {
            id: s.id.clone(),
            expected: t_len,
            found: s.len(),
        });
    }
    if pairs.max_index() >= data.len() {
        return Err(Error::Config(format!(
            "pair references series {}, but only {} series were supplied",
            pairs.max_index(),
            data.len()
        )));
    }
    Ok(t_len)
}

/// All `|S| * K` statistics from per-series prefix sums.
pub fn all_statistics<F: Scalar>(
    data: &[CountSeries<F>],
    pairs: &PairSet,
    family: &IntervalFamily<F>,
    sigma_hat: F,
) -> Result<StatisticMatrix<F>> {
    check_sigma(sigma_hat)?;
    let t_len = panel_length(data, pairs)?;
    if family.t_len() != t_len {
        return Err(Error::Config(format!(
            "interval family built for T = {}, data have T = {t_len}",
            family.t_len()
        )));
    }
    let mut prefix: Vec<Option<Vec<F>>> = vec![None; data.len()];
    for i in pairs.countries() {
        prefix[i] = Some(data[i].prefix_sums());
    }
    let intervals = family.intervals();
    let values: Vec<PairStatistic<F>> = pairs
        .pairs()
        .par_iter()
        .flat_map_iter(|&(i, j)| {
            let pi = prefix[i].as_deref().expect("prefix for country");
            let pj = prefix[j].as_deref().expect("prefix for country");
            intervals.iter().map(move |iv| {
                let a = window_sum(pi, iv);
                let b = window_sum(pj, iv);
                normalized(a - b, a + b, sigma_hat)
            })
        })
        .collect();
    Ok(StatisticMatrix {
        n_pairs: pairs.len(),
        n_intervals: intervals.len(),
        values,
    })
}

/// Nadaraya-Watson estimate with a rectangular kernel: the mean of the
/// observations in `[t - bandwidth, t + bandwidth] ∩ [1, T]`.
pub fn smooth_trend<F: Scalar>(series: &CountSeries<F>, bandwidth_days: usize) -> Vec<F> {
    let x = series.values();
    let n = x.len();
    let prefix = prefix_sums(x);
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(bandwidth_days);
            let hi = (t + bandwidth_days).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) / F::from_usize_lossy(hi - lo + 1)
        })
        .collect()
}
