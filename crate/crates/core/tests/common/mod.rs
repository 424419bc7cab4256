#![allow(dead_code)]

use std::ops::RangeInclusive;

use multiscale_trends::stats::{overdispersion_pooled, pair_statistic};
use multiscale_trends::{
    minimal_intervals, run_test_with_table, CriticalMode, Family, Interval, PairSet, Results,
    Series, Table,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const SEED: u64 = 20200722;
pub const LEVELS: [f64; 3] = [0.01, 0.05, 0.1];
const TABLE_DRAWS: usize = 200;

fn count() -> impl Strategy<Value = u64> {
    prop_oneof![1 => 0u64..4, 4 => 0u64..3000]
}

/// Panels of `n` random count series of common length `t`.
pub fn panel(
    n: RangeInclusive<usize>,
    t: RangeInclusive<usize>,
) -> impl Strategy<Value = Vec<Series>> {
    (n, t)
        .prop_flat_map(|(n, t)| prop::collection::vec(prop::collection::vec(count(), t), n))
        .prop_map(|rows| {
            rows.iter()
                .enumerate()
                .map(|(i, r)| Series::from_counts(format!("u{i}"), r))
                .collect()
        })
        .prop_filter(
            "needs a positive overdispersion estimate",
            |p: &Vec<Series>| {
                PairSet::all(p.len())
                    .and_then(|s| overdispersion_pooled(p, &s))
                    .is_ok_and(|o| o.sigma_hat_sq > 0.0)
            },
        )
}

/// Arbitrary intervals inside the first 60 days.
pub fn interval_set() -> impl Strategy<Value = Vec<Interval>> {
    prop::collection::vec((1usize..=40, 1usize..=20), 0..24)
        .prop_map(|v| v.into_iter().map(|(s, l)| Interval::new(s, l)).collect())
}

pub struct Setup {
    pub pairs: PairSet,
    pub family: Family,
    pub table: Table,
}

pub fn setup(n: usize, t: usize) -> Setup {
    let pairs = PairSet::all(n).unwrap();
    let family = Family::default_for(t).unwrap();
    let table = Table::build(&pairs, &family, &LEVELS, TABLE_DRAWS, SEED).unwrap();
    Setup {
        pairs,
        family,
        table,
    }
}

pub fn run(data: &[Series], s: &Setup, alpha: f64, mode: CriticalMode) -> Results {
    run_test_with_table(data, alpha, mode, &s.pairs, &s.family, &s.table).unwrap()
}

// Relative comparison with a unit floor: a statistic that is exactly zero
// picks up cancellation error of order epsilon after rescaling.
fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Statistics and decisions are unchanged when every count is multiplied by `c`.
pub fn check_scaling(data: &[Series], c: f64) -> Result<(), TestCaseError> {
    let s = setup(data.len(), data[0].len());
    let scaled: Vec<Series> = data.iter().map(|x| x.scaled(c)).collect();
    for mode in [CriticalMode::Scale, CriticalMode::Uniform] {
        let a = run(data, &s, 0.05, mode);
        let b = run(&scaled, &s, 0.05, mode);
        for (pa, pb) in a.pairs.iter().zip(&b.pairs) {
            for (ta, tb) in pa.triples.iter().zip(&pb.triples) {
                prop_assert!(close(ta.psi, tb.psi, 1e-10), "psi {} vs {}", ta.psi, tb.psi);
                prop_assert_eq!(ta.degenerate, tb.degenerate);
                let boundary = (ta.psi.abs() - ta.critical).abs() <= 1e-9 * ta.critical.abs();
                if !boundary {
                    prop_assert_eq!(ta.reject, tb.reject);
                }
            }
        }
    }
    Ok(())
}

/// Swapping the two series of a pair negates the statistic exactly.
pub fn check_antisymmetry(data: &[Series]) -> Result<(), TestCaseError> {
    let pairs = PairSet::all(data.len()).unwrap();
    let sigma = overdispersion_pooled(data, &pairs).unwrap().sigma_hat();
    let family = Family::default_for(data[0].len()).unwrap();
    for &(i, j) in pairs.pairs() {
        for iv in family.intervals() {
            let f = pair_statistic(&data[i], &data[j], iv, sigma).unwrap();
            let r = pair_statistic(&data[j], &data[i], iv, sigma).unwrap();
            prop_assert_eq!(f.psi, -r.psi);
            prop_assert_eq!(f.degenerate, r.degenerate);
        }
    }
    Ok(())
}

/// Rejection sets grow with the level, in both critical-value modes.
pub fn check_alpha_monotone(data: &[Series]) -> Result<(), TestCaseError> {
    let s = setup(data.len(), data[0].len());
    for mode in [CriticalMode::Scale, CriticalMode::Uniform] {
        let runs: Vec<Results> = LEVELS.iter().map(|&a| run(data, &s, a, mode)).collect();
        for w in runs.windows(2) {
            for (lo, hi) in w[0].pairs.iter().zip(&w[1].pairs) {
                for iv in &lo.rejected {
                    prop_assert!(hi.rejected.contains(iv), "{iv} lost at a larger level");
                }
            }
        }
    }
    Ok(())
}

/// Minimal intervals are rejected intervals, cover every rejection, are an
/// antichain under inclusion and are a fixed point.
pub fn check_minimal(rejected: &[Interval]) -> Result<(), TestCaseError> {
    let m = minimal_intervals(rejected);
    for x in &m {
        prop_assert!(rejected.contains(x));
        for y in &m {
            prop_assert!(!x.is_proper_subset_of(y), "{x} inside {y}");
        }
    }
    for r in rejected {
        prop_assert!(
            m.iter().any(|x| x.is_subset_of(r)),
            "{r} has no minimal interval"
        );
        let brute = !rejected.iter().any(|o| o.is_proper_subset_of(r));
        prop_assert_eq!(brute, m.contains(r));
    }
    prop_assert_eq!(minimal_intervals(&m), m.clone());
    let mut dedup = m.clone();
    dedup.sort();
    dedup.dedup();
    prop_assert_eq!(dedup.len(), m.len());
    Ok(())
}

/// Sample mean and variance of `draws` negative binomial variates.
pub fn nb_moments(mean: f64, sigma_sq: f64, draws: usize, seed: u64) -> (f64, f64) {
    use rand::distr::Distribution;
    let nb = multiscale_trends::synthetic::NegativeBinomial::new(mean, sigma_sq).unwrap();
    let mut rng = multiscale_trends::rng::substream(seed, &[draws as u64]);
    let xs: Vec<f64> = (0..draws).map(|_| nb.sample(&mut rng) as f64).collect();
    let m = xs.iter().sum::<f64>() / draws as f64;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (draws - 1) as f64;
    (m, v)
}

/// Gamma(m + r) / (Gamma(r) m!) q^r (1 - q)^m with q = 1/sigma_sq and
/// r = mean / (sigma_sq - 1), evaluated through log-gamma.
pub fn nb_pmf(m: u64, mean: f64, sigma_sq: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let q = 1.0 / sigma_sq;
    let r = mean / (sigma_sq - 1.0);
    let m = m as f64;
    (ln_gamma(m + r) - ln_gamma(r) - ln_gamma(m + 1.0) + r * q.ln() + m * (1.0 - q).ln()).exp()
}

/// Chi-square goodness-of-fit p-value of sampled counts against the pmf.
/// Cells with expected count below 5 are pooled into the upper tail.
pub fn nb_chi_square_p(mean: f64, sigma_sq: f64, draws: usize, seed: u64) -> f64 {
    use rand::distr::Distribution;
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let nb = multiscale_trends::synthetic::NegativeBinomial::new(mean, sigma_sq).unwrap();
    let mut rng = multiscale_trends::rng::substream(seed, &[draws as u64, 1]);
    let n = draws as f64;
    let mut cells = 0u64;
    while nb_pmf(cells, mean, sigma_sq) * n >= 5.0 {
        cells += 1;
    }
    let mut observed = vec![0.0; cells as usize + 1];
    for _ in 0..draws {
        let x = nb.sample(&mut rng).min(cells);
        observed[x as usize] += 1.0;
    }
    let mut expected: Vec<f64> = (0..cells).map(|m| nb_pmf(m, mean, sigma_sq) * n).collect();
    expected.push(n - expected.iter().sum::<f64>());
    let stat: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let df = (expected.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}
