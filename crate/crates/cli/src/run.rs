use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use multiscale_trends::io::figure::{render_figure, FigureData, Overlay};
use multiscale_trends::io::ingest::{ingest_csv, ColumnMapping, IngestError};
use multiscale_trends::io::normalize::normalize;
use multiscale_trends::io::results::{write_triples_csv, ResultsDocument};
use multiscale_trends::io::write_atomic;
use multiscale_trends::stats::smooth_trend;
use multiscale_trends::synthetic::{
    run_power_experiment, run_size_experiment, write_table_csv, Scenario, SimConfig,
};
use multiscale_trends::{
    run_test, CriticalMode, Error, ErrorKind, FamilySpec, PairSpec, Series, TestConfig,
};

use crate::config::{SimulateArgs, TestArgs};
use crate::exit;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Core(Error::Ingest(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => exit::USAGE,
                ErrorKind::Ingestion => exit::INGESTION,
                ErrorKind::Numeric => exit::NUMERIC,
                ErrorKind::Io => exit::IO,
            },
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// `all` or `A:B,C:D` by unit id (0-based indices are accepted too).
fn parse_pairs(spec: &str, series: &[Series]) -> Result<PairSpec, CliError> {
    let spec = spec.trim();
    if spec.is_empty() || spec == "all" {
        return Ok(PairSpec::All);
    }
    let lookup = |name: &str| -> Result<usize, CliError> {
        let name = name.trim();
        series
            .iter()
            .position(|s| s.id == name)
            .or_else(|| name.parse::<usize>().ok().filter(|&i| i < series.len()))
            .ok_or_else(|| CliError::Usage(format!("unknown unit `{name}` in --pairs")))
    };
    let pairs = spec
        .split(',')
        .map(|item| {
            let (a, b) = item
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("pair `{item}` must look like A:B")))?;
            let (a, b) = (lookup(a)?, lookup(b)?);
            if a == b {
                return Err(CliError::Usage(format!(
                    "pair `{item}` compares a unit with itself"
                )));
            }
            Ok((a.min(b), a.max(b)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PairSpec::Explicit(pairs))
}

fn read_overlay(
    path: &Path,
    series: &[Series],
    t_len: usize,
) -> Result<BTreeMap<String, Vec<f64>>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| {
        CliError::Core(Error::Ingest(IngestError::Parse {
            line: 0,
            reason: e.to_string(),
        }))
    })?;
    let mut out: BTreeMap<String, Vec<f64>> = series
        .iter()
        .map(|s| (s.id.clone(), vec![0.0; t_len]))
        .collect();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IngestError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| IngestError::Parse { line, reason };
        let unit = rec.get(0).unwrap_or("").trim();
        let day: usize = rec
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| bad("invalid day".into()))?;
        let value: f64 = rec
            .get(2)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| bad("invalid value".into()))?;
        if let Some(v) = out.get_mut(unit) {
            if (1..=t_len).contains(&day) {
                v[day - 1] = value;
            }
        }
    }
    Ok(out)
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_test(args: TestArgs) -> Result<(), CliError> {
    let args = args.resolve()?;
    let input = args
        .input
        .clone()
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let mode: CriticalMode = args.mode.as_deref().unwrap_or("scale").parse()?;
    let family: FamilySpec = args.family.as_deref().unwrap_or("default").parse()?;
    let bandwidth = args.bandwidth.unwrap_or(7);
    if bandwidth == 0 {
        return Err(CliError::Usage("--bandwidth must be >= 1".into()));
    }
    let defaults = ColumnMapping::default();
    let columns = ColumnMapping {
        date: args.date_col.clone().unwrap_or(defaults.date),
        unit: args.unit_col.clone().unwrap_or(defaults.unit),
        new_cases: args.cases_col.clone().unwrap_or(defaults.new_cases),
    };
    let mut config = TestConfig {
        alpha: args.alpha.unwrap_or(0.05),
        mode,
        draws: args
            .draws
            .unwrap_or(multiscale_trends::quantile::DEFAULT_DRAWS),
        seed: args.seed.unwrap_or(1),
        family,
        pairs: PairSpec::All,
        cache_dir: args.cache_dir.clone(),
    };
    config.validate()?;

    let table = ingest_csv(&input, &columns)?;
    let (series, report) = normalize(&table)?;
    config.pairs = parse_pairs(args.pairs.as_deref().unwrap_or("all"), &series)?;
    let results = run_test(&series, &config)?;

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("trendscan-out"));
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let mut triples = Vec::new();
    write_triples_csv(&results, &mut triples)?;
    write_atomic(&out.join("triples.csv"), &triples)?;

    if !args.no_figures {
        let overlay = match &args.overlay {
            Some(p) => Some(read_overlay(p, &series, report.t_len)?),
            None => None,
        };
        let fig_dir = out.join("figures");
        fs::create_dir_all(&fig_dir).map_err(|e| io_err(&fig_dir, e))?;
        let smoothed: Vec<Vec<f64>> = series.iter().map(|s| smooth_trend(s, bandwidth)).collect();
        for pair in &results.pairs {
            let ov = overlay.as_ref().map(|m| Overlay {
                label: "auxiliary series".into(),
                series_i: m[&pair.unit_i].clone(),
                series_j: m[&pair.unit_j].clone(),
            });
            let svg = render_figure(&FigureData {
                pair,
                raw_i: series[pair.i].values(),
                raw_j: series[pair.j].values(),
                smooth_i: &smoothed[pair.i],
                smooth_j: &smoothed[pair.j],
                overlay: ov.as_ref(),
            });
            let name = format!(
                "{}_vs_{}.svg",
                file_stem(&pair.unit_i),
                file_stem(&pair.unit_j)
            );
            write_atomic(&fig_dir.join(name), svg.as_bytes())?;
        }
    }

    let doc = ResultsDocument::new(&config, results, Some(report));
    write_atomic(&out.join("results.json"), doc.to_json()?.as_bytes())?;
    for w in &doc.results.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", doc.summary.statement);
    for p in &doc.summary.pairs {
        println!("  {}", p.statement);
    }
    Ok(())
}

fn parse_alphas(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("invalid alpha `{a}`")))
        })
        .collect()
}

pub fn cmd_simulate(args: SimulateArgs, power: bool) -> Result<(), CliError> {
    let args = args.resolve()?;
    let scenario = if power {
        let s: Scenario = args.scenario.as_deref().unwrap_or("A").parse()?;
        if s == Scenario::Null {
            return Err(CliError::Usage("power runs need --scenario A or B".into()));
        }
        s
    } else {
        match args.scenario.as_deref() {
            None | Some("null") => Scenario::Null,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "size runs use the common trend; got --scenario {other}"
                )))
            }
        }
    };
    let mut cfg = SimConfig::new(
        args.n.unwrap_or(5),
        args.t_len.unwrap_or(100),
        args.sigma.unwrap_or(15.0),
        scenario,
        args.reps.unwrap_or(1000),
    );
    if let Some(a) = &args.alphas {
        cfg.alphas = parse_alphas(a)?;
    }
    cfg.seed = args.seed.unwrap_or(1);
    if let Some(d) = args.draws {
        cfg.draws = d;
    }
    eprintln!(
        "note: one Gaussian quantile table (N = {}, seed {}) is shared by all {} replications",
        cfg.draws,
        cfg.quantile_seed(),
        cfg.reps
    );
    let rows = if power {
        run_power_experiment(&cfg)?
    } else {
        run_size_experiment(&cfg)?
    };
    let mut buf = Vec::new();
    write_table_csv(&rows, &mut buf)?;
    match &args.out {
        Some(p) => write_atomic(p, &buf)?,
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(())
}
