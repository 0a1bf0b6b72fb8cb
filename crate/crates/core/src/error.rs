//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("{context}: row {row} has {got} entries, expected {expected}")]
    RaggedMatrix {
        context: String,
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("{context}: matrix must have at least one row and one column")]
    EmptyMatrix { context: String },

    #[error("{context}: row {row} sums to {sum:e}, must be within {tol:e} of 1")]
    NotStochastic {
        context: String,
        row: usize,
        sum: f64,
        tol: f64,
    },

    #[error("{context}: entry ({row}, {col}) = {value} is outside {range}")]
    EntryOutOfRange {
        context: String,
        row: usize,
        col: usize,
        value: f64,
        range: String,
    },

    #[error("{context}: entry ({row}, {col}) is not finite")]
    NotFinite {
        context: String,
        row: usize,
        col: usize,
    },

    #[error("{name} = {value} is outside {range}")]
    ParamOutOfRange {
        name: String,
        value: f64,
        range: String,
    },

    #[error("{context}: index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        context: String,
        index: usize,
        bound: usize,
    },

    #[error("exact enumeration would visit {tuples} (prompt, response, response) tuples, limit is {limit}")]
    EnumerationTooLarge { tuples: u128, limit: u64 },

    #[error("empirical decision needs at least one response")]
    EmptyResponses,

    #[error("Monte Carlo estimation needs at least 2 repetitions, got {got}")]
    TooFewReps { got: u64 },

    #[error(
        "policy differs from the maximally inclusive policy by {max_abs_diff:e} (tolerance {tol:e})"
    )]
    NotMaximallyInclusive { max_abs_diff: f64, tol: f64 },
}
