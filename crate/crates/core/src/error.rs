use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("marginal mismatch: L1 discrepancy {discrepancy:e}")]
    MarginalMismatch { discrepancy: f64 },
    #[error("cost matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("invalid cost entry at ({row}, {col}): {reason}")]
    InvalidCost {
        row: usize,
        col: usize,
        reason: &'static str,
    },
    #[error("cost is not debiasable: c0({row}, {col}) = {value}")]
    NotDebiasable { row: usize, col: usize, value: f64 },
    #[error("negative coefficient {0}")]
    NegativeCoefficient(f64),
    #[error("empty cost family")]
    EmptyFamily,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("not negative definite: clipped eigenvalue {clipped:e} against largest {largest:e}")]
    NotNegativeDefinite { clipped: f64, largest: f64 },
    #[error("kernel is not positive semidefinite: smallest eigenvalue {0:e}")]
    NotPsd(f64),
    #[error("infeasible support: atom {index} of the {side} measure has no finite-cost partner")]
    Infeasible { side: &'static str, index: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("unsupported exact-OT instance: {0}")]
    UnsupportedInstance(String),
    #[error("insufficient grid coverage: {0}")]
    GridCoverage(String),
    #[error("empty effective support")]
    EmptySupport,
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
