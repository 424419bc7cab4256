//! Multiscale comparison of nonparametric time trends in count series.
//!
//! For every pair of series and every window in a family of time
//! intervals, the normalized difference of interval sums is compared with
//! a critical value calibrated by Gaussian Monte Carlo so that the
//! familywise error rate over all (pair, interval) hypotheses is held at
//! the chosen level. Rejected windows, and the minimal ones among them,
//! localize where two trends differ.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the usual `f64` instantiation.

pub mod error;
pub mod interval;
pub mod io;
pub mod multiscale;
pub mod quantile;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use interval::{minimal_intervals, scale_constants, Interval, IntervalFamily, StartRule};
pub use multiscale::{
    fwer_decision_summary, run_test, run_test_with_table, DecisionSummary, FamilySpec, PairSpec,
    TestConfig, TestResultSet,
};
pub use quantile::{critical_value, CriticalMode, QuantileTable};
pub use scalar::Scalar;
pub use stats::{CountSeries, PairSet};

pub type Series = CountSeries<f64>;
pub type Family = IntervalFamily<f64>;
pub type Table = QuantileTable<f64>;
pub type Results = TestResultSet<f64>;

pub type Series32 = CountSeries<f32>;
pub type Family32 = IntervalFamily<f32>;
pub type Table32 = QuantileTable<f32>;
pub type Results32 = TestResultSet<f32>;
