//! Reading daily case counts from CSV.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("duplicate (date, unit) rows: {}", .0.join("; "))]
    Duplicate(Vec<String>),
    #[error("unit `{unit}` has a gap: no data between {after} and {before}")]
    Gap {
        unit: String,
        after: NaiveDate,
        before: NaiveDate,
    },
    #[error("no data rows")]
    Empty,
    #[error("unit `{0}` never reaches 100 cumulative cases")]
    NeverReaches100(String),
}

/// Header names of the three input columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub date: String,
    pub unit: String,
    pub new_cases: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            date: "date".into(),
            unit: "unit".into(),
            new_cases: "new_cases".into(),
        }
    }
}

/// Contiguous daily new-case counts of one unit; may contain negatives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitCases {
    pub unit: String,
    pub first_date: NaiveDate,
    pub new_cases: Vec<i64>,
}

impl UnitCases {
    pub fn date_of(&self, idx: usize) -> NaiveDate {
        self.first_date + chrono::Days::new(idx as u64)
    }
}

/// Validated input: one gap-free record per unit, in order of first
/// appearance in the file.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RawCaseTable {
    pub units: Vec<UnitCases>,
}

impl RawCaseTable {
    /// `(date, unit, new_cases)` rows, unit by unit.
    pub fn rows(&self) -> impl Iterator<Item = (NaiveDate, &str, i64)> + '_ {
        self.units.iter().flat_map(|u| {
            u.new_cases
                .iter()
                .enumerate()
                .map(move |(k, &c)| (u.date_of(k), u.unit.as_str(), c))
        })
    }

    pub fn unit(&self, name: &str) -> Option<&UnitCases> {
        self.units.iter().find(|u| u.unit == name)
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%d/%m/%Y"))
        .ok()
}

/// Parses and validates a case table from any reader.
pub fn read_cases<R: std::io::Read>(
    reader: R,
    columns: &ColumnMapping,
) -> Result<RawCaseTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Parse {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let (ci_date, ci_unit, ci_cases) = (
        col(&columns.date)?,
        col(&columns.unit)?,
        col(&columns.new_cases)?,
    );

    let mut order: Vec<String> = Vec::new();
    let mut by_unit: HashMap<String, BTreeMap<NaiveDate, (i64, u64)>> = HashMap::new();
    let mut duplicates = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IngestError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let date = parse_date(field(ci_date)).ok_or_else(|| IngestError::Parse {
            line,
            reason: format!("invalid date `{}`", field(ci_date)),
        })?;
        let unit = field(ci_unit).to_string();
        if unit.is_empty() {
            return Err(IngestError::Parse {
                line,
                reason: "empty unit".into(),
            });
        }
        let raw = field(ci_cases);
        let cases = raw
            .parse::<i64>()
            .or_else(|_| {
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0 && v.is_finite())
                    .map(|v| v as i64)
                    .ok_or(())
            })
            .map_err(|_| IngestError::Parse {
                line,
                reason: format!("invalid case count `{raw}`"),
            })?;
        let entry = by_unit.entry(unit.clone()).or_insert_with(|| {
            order.push(unit.clone());
            BTreeMap::new()
        });
        if let Some(&(_, first_line)) = entry.get(&date) {
            duplicates.push(format!("{unit} on {date} (lines {first_line} and {line})"));
        } else {
            entry.insert(date, (cases, line));
        }
    }
    if !duplicates.is_empty() {
        return Err(IngestError::Duplicate(duplicates));
    }
    if order.is_empty() {
        return Err(IngestError::Empty);
    }
    let mut units = Vec::with_capacity(order.len());
    for unit in order {
        let days = by_unit.remove(&unit).expect("unit recorded");
        let first_date = *days.keys().next().expect("non-empty unit");
        let mut prev = first_date;
        let mut new_cases = Vec::with_capacity(days.len());
        for (i, (&date, &(c, _))) in days.iter().enumerate() {
            if i > 0 && date != prev + chrono::Days::new(1) {
                return Err(IngestError::Gap {
                    unit,
                    after: prev,
                    before: date,
                });
            }
            prev = date;
            new_cases.push(c);
        }
        units.push(UnitCases {
            unit,
            first_date,
            new_cases,
        });
    }
    Ok(RawCaseTable { units })
}

pub fn ingest_csv(path: &Path, columns: &ColumnMapping) -> Result<RawCaseTable, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_cases(std::io::BufReader::new(file), columns)
}
