//! Versioned JSON results document and per-triple CSV export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::normalize::NormalizationReport;
use crate::error::{Error, Result};
use crate::multiscale::{fwer_decision_summary, DecisionSummary, TestConfig, TestResultSet};

/// Bumped whenever the layout of [`ResultsDocument`] changes.
pub const RESULTS_SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    /// Schema version of this document.
    pub spec_version: String,
    pub config: TestConfig,
    #[serde(flatten)]
    pub results: TestResultSet<f64>,
    pub summary: DecisionSummary,
    pub normalization: Option<NormalizationReport>,
}

impl ResultsDocument {
    pub fn new(
        config: &TestConfig,
        results: TestResultSet<f64>,
        normalization: Option<NormalizationReport>,
    ) -> Self {
        ResultsDocument {
            spec_version: RESULTS_SCHEMA_VERSION.into(),
            config: config.clone(),
            summary: fwer_decision_summary(&results),
            results,
            normalization,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub const TRIPLE_COLUMNS: [&str; 11] = [
    "i",
    "j",
    "unit_i",
    "unit_j",
    "start",
    "end",
    "length",
    "psi",
    "critical",
    "reject",
    "degenerate",
];

/// One line per (pair, interval).
pub fn write_triples_csv<W: Write>(results: &TestResultSet<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Numeric(format!("csv: {e}"));
    w.write_record(TRIPLE_COLUMNS).map_err(csv_err)?;
    for p in &results.pairs {
        for t in &p.triples {
            w.write_record([
                p.i.to_string(),
                p.j.to_string(),
                p.unit_i.clone(),
                p.unit_j.clone(),
                t.start.to_string(),
                t.interval().end().to_string(),
                t.length.to_string(),
                t.psi.to_string(),
                t.critical.to_string(),
                t.reject.to_string(),
                t.degenerate.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<triples>", e))
}
