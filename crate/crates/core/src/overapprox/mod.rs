//! Set-membership estimation of the unknown drift `f` and input matrix `g`.
//!
//! States are `2n`-dimensional with positions in `x[..n]` and velocities in
//! `x[n..]`. Only the `n` dynamic rows `ẋ₂ = f(x) + g(x)u` are estimated; the
//! kinematic rows `ẋ₁ = x₂` are known exactly.

mod contract;
mod evidence;
mod reach;
mod text;

pub use contract::{contract, contract_ordered};
pub use evidence::{
    approximate, cover, cover_box, estimate_g, ApproxSettings, DataPoint, EvidenceEntry,
    EvidenceSet, LipschitzBounds, SweepReport,
};
pub use reach::{
    enclose_interval, error_bound_from_enclosure, MAX_SUBSTEPS, estimation_error_bound, estimation_error_bound_chained, lifted_beta,
    predict_from_box, predict_next_state, StateEnclosure,
};
pub use text::{read_evidence, write_evidence};

use thiserror::Error;

use crate::interval::IntervalError;

/// Sentinel used in [`OverapproxError::EmptyIntersection`] for the global prior range.
pub const PRIOR_RANGE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OverapproxError {
    #[error(
        "inconsistent evidence at row {row}{}: entries {first} and {second} do not overlap{}",
        col.map(|c| format!(", column {c}")).unwrap_or_default(),
        datapoint.map(|d| format!(" (datapoint {d})")).unwrap_or_default()
    )]
    EmptyIntersection {
        row: usize,
        col: Option<usize>,
        first: usize,
        second: usize,
        datapoint: Option<usize>,
    },
    #[error(
        "datapoint contradicts its prior enclosure at row {row}{}",
        datapoint.map(|d| format!(" (datapoint {d})")).unwrap_or_default()
    )]
    Contradiction { datapoint: Option<usize>, row: usize },
    #[error("fixpoint not reached after {sweeps} sweeps (residual {residual:e})")]
    NonTermination { sweeps: usize, residual: f64 },
    #[error("step {dt} too large for the enclosure, max admissible {max_dt}")]
    StepTooLarge { dt: f64, max_dt: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}
