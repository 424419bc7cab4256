//! Alignment of each unit at its 100th confirmed case.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ingest::{IngestError, RawCaseTable, UnitCases};
use crate::stats::CountSeries;

/// Cumulative count that defines day 1 of a unit.
pub const START_THRESHOLD: i64 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitStart {
    pub unit: String,
    /// First date with cumulative (clamped) count >= 100.
    pub start_date: NaiveDate,
    /// Days from the start date to the end of the unit's data.
    pub available_days: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub units: Vec<UnitStart>,
    /// Common length: the shortest post-start availability.
    #[serde(rename = "T")]
    pub t_len: usize,
    /// Negative values set to 0 inside the retained windows.
    pub negatives_replaced: usize,
    /// Negative values set to 0 anywhere in the input.
    pub negatives_replaced_total: usize,
}

/// Clamps negatives to zero, starts every unit at its 100th case and
/// truncates all units to the common length.
pub fn normalize(
    table: &RawCaseTable,
) -> Result<(Vec<CountSeries<f64>>, NormalizationReport), IngestError> {
    if table.units.is_empty() {
        return Err(IngestError::Empty);
    }
    let mut starts = Vec::with_capacity(table.units.len());
    let mut total_negatives = 0;
    let mut clamped_all = Vec::with_capacity(table.units.len());
    for u in &table.units {
        let clamped: Vec<i64> = u.new_cases.iter().map(|&c| c.max(0)).collect();
        total_negatives += u.new_cases.iter().filter(|&&c| c < 0).count();
        let mut cum = 0i64;
        let start = clamped
            .iter()
            .position(|&c| {
                cum += c;
                cum >= START_THRESHOLD
            })
            .ok_or_else(|| IngestError::NeverReaches100(u.unit.clone()))?;
        starts.push(UnitStart {
            unit: u.unit.clone(),
            start_date: u.date_of(start),
            available_days: clamped.len() - start,
        });
        clamped_all.push((start, clamped));
    }
    let t_len = starts.iter().map(|s| s.available_days).min().unwrap_or(0);
    let mut negatives_replaced = 0;
    let series = table
        .units
        .iter()
        .zip(&clamped_all)
        .map(|(u, (start, clamped))| {
            negatives_replaced += u.new_cases[*start..start + t_len]
                .iter()
                .filter(|&&c| c < 0)
                .count();
            let values = clamped[*start..start + t_len]
                .iter()
                .map(|&c| c as f64)
                .collect();
            CountSeries::new(u.unit.clone(), values).expect("clamped counts are valid")
        })
        .collect();
    Ok((
        series,
        NormalizationReport {
            units: starts,
            t_len,
            negatives_replaced,
            negatives_replaced_total: total_negatives,
        },
    ))
}

/// Table holding `series` as consecutive days from `first_date`.
pub fn table_from_series(series: &[CountSeries<f64>], first_date: NaiveDate) -> RawCaseTable {
    RawCaseTable {
        units: series
            .iter()
            .map(|s| UnitCases {
                unit: s.id.clone(),
                first_date,
                new_cases: s.values().iter().map(|&v| v.round() as i64).collect(),
            })
            .collect(),
    }
}
