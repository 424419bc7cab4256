//! Acceptance suite. Prints one PASS/FAIL line per criterion, followed by
//! indented detail lines, and exits non-zero if any criterion fails.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use common::*;
use multiscale_trends::io::ingest::{ingest_csv, ColumnMapping};
use multiscale_trends::io::normalize::normalize;
use multiscale_trends::stats::overdispersion_pooled;
use multiscale_trends::synthetic::{
    generate_panel, run_power_experiment, run_size_experiment, Scenario, SimConfig, TableRow,
    TrendFunction,
};
use multiscale_trends::{
    run_test, scale_constants, Family, PairSet, Results, Series, Table, TestConfig,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rayon::prelude::*;

const SIZE_TOL: f64 = 0.02;
const POWER_A_TOL: f64 = 0.04;
const POWER_B_TOL: f64 = 0.03;
const POWER_B250_TOL: f64 = 0.02;
const ROBUST_TOL: f64 = 0.05;
const SCALE_REL_TOL: f64 = 1e-12;
const SIGMA_HAT_TOL: f64 = 0.5;
const FIXTURE_SIGMA_TOL: f64 = 0.01;
const FWER_SLACK: f64 = 0.02;
const PROPERTY_CASES: u32 = 64;

struct Criterion {
    name: &'static str,
    details: Vec<(bool, String)>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Criterion {
            name,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) -> bool {
        self.details.push((ok, detail));
        ok
    }

    fn within(&mut self, label: &str, got: f64, want: f64, tol: f64) -> bool {
        let ok = (got - want).abs() <= tol;
        self.check(ok, format!("{label}: {got:.4} (target {want} ± {tol})"))
    }

    fn report(self) -> bool {
        let ok = !self.details.is_empty() && self.details.iter().all(|d| d.0);
        println!("{} {}", if ok { "PASS" } else { "FAIL" }, self.name);
        for (good, d) in &self.details {
            println!("    [{}] {d}", if *good { "ok" } else { "x" });
        }
        ok
    }
}

fn sim(t: usize, sigma: f64, scenario: Scenario, reps: usize, alphas: &[f64]) -> SimConfig {
    let mut cfg = SimConfig::new(5, t, sigma, scenario, reps);
    cfg.alphas = alphas.to_vec();
    cfg.seed = SEED;
    cfg
}

fn value_at(rows: &[TableRow], alpha: f64) -> f64 {
    rows.iter()
        .find(|r| r.alpha == alpha)
        .expect("level present")
        .value
}

fn power(t: usize, sigma: f64, scenario: Scenario, reps: usize, alpha: f64) -> f64 {
    value_at(
        &run_power_experiment(&sim(t, sigma, scenario, reps, &[alpha])).unwrap(),
        alpha,
    )
}

fn interval_family() -> Criterion {
    let mut c = Criterion::new("interval-family exactness (K and p for n = 5)");
    let start = Instant::now();
    for (t, k) in [(100, 96), (250, 268), (500, 556)] {
        let got = Family::default_for(t).unwrap().len();
        let p = got * PairSet::all(5).unwrap().len();
        c.check(
            got == k && p == 10 * k,
            format!(
                "T = {t}: K = {got}, p = {p} (target K = {k}, p = {})",
                10 * k
            ),
        );
    }
    let secs = start.elapsed().as_secs_f64();
    c.check(secs < 1.0, format!("construction time {secs:.4} s (< 1 s)"));
    c
}

// 50-digit evaluations of the closed forms (tests/oracles/scale_constants.py).
#[allow(clippy::excessive_precision)]
const SCALE_ORACLE: [(usize, usize, f64, f64); 16] = [
    (100, 7, 1.1371320745760235879, 2.3061916819435361336),
    (100, 14, 1.1152698578558284404, 1.9829840424838686803),
    (100, 21, 1.1007768032839742082, 1.7667188504482926762),
    (100, 28, 1.0892504932647027704, 1.5955974904799063666),
    (139, 7, 1.1466827717120973579, 2.4448164692161980166),
    (139, 14, 1.1260127018426377375, 2.1426229736075514892),
    (139, 21, 1.1126693003584722442, 1.9441972612918004832),
    (139, 28, 1.1023464915770929338, 1.7901225784596360055),
    (250, 7, 1.162800803932693499, 2.6741543593468695382),
    (250, 14, 1.1436497652098838839, 2.401001286233303049),
    (250, 21, 1.1316446482119522344, 2.2257306576218172031),
    (250, 28, 1.1226300435583029773, 2.0924896213300760404),
    (500, 7, 1.1807136413860359569, 2.9218822527154917635),
    (500, 14, 1.162800803932693499, 2.6741543593468695382),
    (500, 21, 1.151778446565099421, 2.5179696823825217559),
    (500, 28, 1.1436497652098838839, 2.401001286233303049),
];

fn scale_constants_check() -> Criterion {
    let mut c = Criterion::new("scale constants");
    let (a1, b1) = scale_constants::<f64>(1.0).unwrap();
    c.check(
        a1 == 1.0 && b1 == 0.0,
        format!("h = 1: (a, b) = ({a1}, {b1}), exact (1, 0)"),
    );
    let mut worst = 0.0f64;
    for (t, d, a, b) in SCALE_ORACLE {
        let family = Family::default_for(t).unwrap();
        let s = family
            .scales()
            .iter()
            .find(|s| (s.h - d as f64 / t as f64).abs() < 1e-15)
            .expect("scale present in the family");
        worst = worst.max(((s.a - a) / a).abs()).max(((s.b - b) / b).abs());
    }
    c.check(
        worst <= SCALE_REL_TOL,
        format!("largest relative error vs extended precision over 16 scales: {worst:.2e} (≤ {SCALE_REL_TOL:e})"),
    );
    c
}

fn size(size_rows: &[TableRow]) -> Criterion {
    let mut c = Criterion::new("empirical size (T = 100, n = 5, σ = 15, R = 1000, N = 5000)");
    for (alpha, target) in [(0.01, 0.011), (0.05, 0.047), (0.1, 0.093)] {
        c.within(
            &format!("α = {alpha}"),
            value_at(size_rows, alpha),
            target,
            SIZE_TOL,
        );
    }
    c
}

fn power_check() -> (Criterion, f64, f64) {
    let mut c = Criterion::new("empirical power (n = 5, σ = 15)");
    let a = power(100, 15.0, Scenario::A, 1000, 0.05);
    c.within(
        "scenario A, T = 100, α = 0.05, R = 1000",
        a,
        0.518,
        POWER_A_TOL,
    );
    let b = power(100, 15.0, Scenario::B, 1000, 0.05);
    c.within(
        "scenario B, T = 100, α = 0.05, R = 1000",
        b,
        0.910,
        POWER_B_TOL,
    );
    let b250 = power(250, 15.0, Scenario::B, 500, 0.01);
    c.within(
        "scenario B, T = 250, α = 0.01, R = 500",
        b250,
        0.991,
        POWER_B250_TOL,
    );
    (c, a, b)
}

fn robustness() -> Criterion {
    let mut c = Criterion::new("robustness ordering in σ (T = 100, n = 5, α = 0.05, R = 500)");
    for scenario in [Scenario::A, Scenario::B] {
        let p: Vec<f64> = [10.0, 15.0, 20.0]
            .iter()
            .map(|&s| power(100, s, scenario, 500, 0.05))
            .collect();
        c.check(
            p[0] > p[1] && p[1] > p[2],
            format!(
                "scenario {}: σ = 10 / 15 / 20 → {:.3} > {:.3} > {:.3}",
                scenario.label(),
                p[0],
                p[1],
                p[2]
            ),
        );
        if scenario == Scenario::A {
            for (v, (s, target)) in p.iter().zip([(10, 0.915), (15, 0.518), (20, 0.275)]) {
                c.within(&format!("scenario A, σ = {s}"), *v, target, ROBUST_TOL);
            }
        }
    }
    c
}

fn nb() -> Criterion {
    let mut c = Criterion::new("negative binomial generator");
    let (m, v) = nb_moments(1000.0, 225.0, 100_000, SEED);
    c.check(
        (m / 1000.0 - 1.0).abs() <= 0.01,
        format!("mean at (1000, 225), 10^5 draws: {m:.2} (within 1%)"),
    );
    c.check(
        (v / 225_000.0 - 1.0).abs() <= 0.05,
        format!("variance: {v:.0} vs 225000 (within 5%)"),
    );
    let p = nb_chi_square_p(2.0, 4.0, 100_000, SEED);
    c.check(
        p > 0.001,
        format!("pmf chi-square at (2, 4), 10^5 draws: p = {p:.4} (> 0.001)"),
    );
    c
}

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/ecdc_2020-07-22.csv")
}

/// The five-country panel in the order DE, IT, ES, FR, UK plus its length
/// and number of replaced negatives.
fn country_panel() -> Result<(Vec<Series>, usize, usize), String> {
    let path = fixture_path();
    if !path.exists() {
        return Err(format!(
            "BLOCKED: fixture {} is not present",
            path.display()
        ));
    }
    let table = ingest_csv(&path, &ColumnMapping::default()).map_err(|e| e.to_string())?;
    let (series, report) = normalize(&table).map_err(|e| e.to_string())?;
    let ordered = ["DE", "IT", "ES", "FR", "UK"]
        .iter()
        .map(|u| {
            series
                .iter()
                .find(|s| s.id == *u)
                .cloned()
                .ok_or(format!("unit {u} missing"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((ordered, report.t_len, report.negatives_replaced))
}

fn country_results(panel: &[Series]) -> Results {
    let cfg = TestConfig {
        seed: SEED,
        ..TestConfig::default()
    };
    run_test(panel, &cfg).unwrap()
}

fn overdispersion(data: &Result<(Vec<Series>, usize, usize), String>) -> Criterion {
    let mut c = Criterion::new("overdispersion estimator");
    let pairs = PairSet::all(5).unwrap();
    let trends = [TrendFunction::Null; 5];
    let est: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|rep| {
            let panel = generate_panel(&trends, 500, 15.0, SEED, rep).unwrap();
            overdispersion_pooled(&panel, &pairs).unwrap().sigma_hat()
        })
        .collect();
    let mean = est.iter().sum::<f64>() / est.len() as f64;
    c.within(
        "synthetic σ = 15, T = 500, mean σ̂ over 200 replications",
        mean,
        15.0,
        SIGMA_HAT_TOL,
    );
    match data {
        Ok((panel, t, negatives)) => {
            c.check(*t == 139, format!("fixture: T = {t} (target 139)"));
            c.check(
                *negatives == 6,
                format!("fixture: {negatives} negatives replaced (target 6)"),
            );
            let s = overdispersion_pooled(panel, &pairs).unwrap().sigma_hat();
            c.within("fixture σ̂", s, 14.44, FIXTURE_SIGMA_TOL);
        }
        Err(e) => {
            c.check(
                false,
                format!("fixture σ̂ = 14.44 ± {FIXTURE_SIGMA_TOL}: {e}"),
            );
        }
    }
    c
}

fn country_qualitative(data: &Result<(Vec<Series>, usize, usize), String>) -> Criterion {
    let mut c = Criterion::new("five-country data: qualitative reproduction (α = 0.05)");
    let (panel, t) = match data {
        Ok((panel, t, _)) => (panel, *t),
        Err(e) => {
            c.check(
                false,
                format!("Germany–Italy and Germany–UK comparisons: {e}"),
            );
            return c;
        }
    };
    let r = country_results(panel);
    let de_it = r.pair("DE", "IT").unwrap();
    match (
        de_it.rejected.iter().map(|i| i.start).min(),
        de_it.rejected.iter().map(|i| i.end()).max(),
    ) {
        (Some(first), Some(last)) => {
            c.check(
                first >= 29,
                format!("Germany–Italy earliest rejected day {first} (≥ 29)"),
            );
            c.check(
                last <= 98,
                format!("Germany–Italy latest rejected day {last} (≤ 98)"),
            );
        }
        _ => {
            c.check(false, "Germany–Italy: empty rejection set".into());
        }
    }
    let de_uk = r.pair("DE", "UK").unwrap();
    let third = t as f64 / 3.0;
    let early = de_uk.rejected.iter().any(|i| (i.start as f64) <= third);
    let late = de_uk.rejected.iter().any(|i| i.end() as f64 > 2.0 * third);
    c.check(
        early && late,
        format!("Germany–UK rejections reach the first third: {early}, the last third: {late}"),
    );
    c
}

fn run_property<S: Strategy>(
    c: &mut Criterion,
    label: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) {
    let config = Config {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let outcome = runner.run(&strategy, test);
    let detail = match &outcome {
        Ok(()) => format!("{label}: {PROPERTY_CASES} cases"),
        Err(e) => format!("{label}: {e}"),
    };
    c.check(outcome.is_ok(), detail);
}

fn properties(size_t100: &[TableRow]) -> Criterion {
    let mut c = Criterion::new("property suites");
    for factor in [0.5, 3.0, 10.0] {
        run_property(
            &mut c,
            &format!("decisions invariant under X → {factor}·X"),
            panel(2..=4, 28..=60),
            |d| check_scaling(&d, factor),
        );
    }
    run_property(
        &mut c,
        "antisymmetry of the statistic",
        panel(2..=4, 7..=60),
        |d| check_antisymmetry(&d),
    );
    run_property(
        &mut c,
        "rejection sets grow with α",
        panel(2..=4, 21..=60),
        |d| check_alpha_monotone(&d),
    );
    run_property(
        &mut c,
        "minimal intervals: containment and idempotence",
        interval_set(),
        |r| check_minimal(&r),
    );

    let pairs = PairSet::all(5).unwrap();
    let family = Family::default_for(100).unwrap();
    let tables: Vec<String> = [1, 4, 8]
        .iter()
        .map(|&n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| Table::build(&pairs, &family, &LEVELS, 5000, SEED).unwrap())
                .to_cache_string()
        })
        .collect();
    c.check(
        tables[0] == tables[1] && tables[0] == tables[2],
        "quantile table bit-identical on 1, 4 and 8 threads (T = 100, n = 5, N = 5000)".into(),
    );

    let size_t250 = run_size_experiment(&sim(250, 15.0, Scenario::Null, 1000, &LEVELS)).unwrap();
    for (t, rows) in [(100, size_t100), (250, &size_t250[..])] {
        for &alpha in &LEVELS {
            let v = value_at(rows, alpha);
            c.check(
                v <= alpha + FWER_SLACK,
                format!("FWER under the full null, T = {t}, n = 5, R = 1000, α = {alpha}: {v:.4} (≤ {:.2})", alpha + FWER_SLACK),
            );
        }
    }
    c
}

fn main() {
    let start = Instant::now();
    println!("acceptance suite (seed {SEED})");
    let mut ok = true;
    ok &= interval_family().report();
    ok &= scale_constants_check().report();
    let size_rows = run_size_experiment(&sim(100, 15.0, Scenario::Null, 1000, &LEVELS)).unwrap();
    ok &= size(&size_rows).report();
    ok &= power_check().0.report();
    ok &= robustness().report();
    ok &= nb().report();
    let data = country_panel();
    ok &= overdispersion(&data).report();
    ok &= country_qualitative(&data).report();
    ok &= properties(&size_rows).report();
    println!(
        "acceptance: {} ({:.1} s)",
        if ok {
            "all criteria passed"
        } else {
            "some criteria FAILED"
        },
        start.elapsed().as_secs_f64()
    );
    if !ok {
        std::process::exit(1);
    }
}
