//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by construction, simulation and statistic evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("sample lengths differ: {anchors} anchors vs {marks} marks")]
    LengthMismatch { anchors: usize, marks: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid weight: w({x}) = {value} is not strictly positive")]
    InvalidWeight { x: f64, value: f64 },

    #[error("tabulation has {values} values but measure has {atoms} atoms")]
    TabulationMismatch { values: usize, atoms: usize },

    #[error("negative conditional variance at index {index}")]
    NegativeVariance { index: usize },

    #[error("quadrature measure has negative weight at index {index}")]
    NegativeMeasureWeight { index: usize },

    #[error("grid size must be at least {min}")]
    GridTooSmall { min: usize },

    #[error("{name} = {value} outside valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("statistic must be non-negative, got {0}")]
    NegativeStatistic(f64),

    #[error("scheme violates high-frequency conditions: beta = {beta} not in (1/2, 1)")]
    InvalidScheme { beta: f64 },

    #[error("observation times must be strictly increasing (violated at index {index})")]
    NonIncreasingTimes { index: usize },

    #[error("trajectory diverged at step {step}")]
    TrajectoryDiverged { step: usize },

    #[error("model not positive recurrent on domain: {reason}")]
    NotPositiveRecurrent { reason: &'static str },

    #[error("zero horizon: observation window has length 0")]
    ZeroHorizon,

    #[error("variance profile total mass must be positive, got {0}")]
    NonPositivePsiMass(f64),

    #[error("wrong limit law: expected {expected}, got {got}")]
    WrongLimitLaw {
        expected: &'static str,
        got: &'static str,
    },

    #[error("degenerate integration domain: no atom has variance profile >= {floor}")]
    DegenerateDomain { floor: f64 },

    #[error("experiment spec invalid: {0}")]
    InvalidSpec(String),

    #[error("{failed} of {total} replications failed (budget {budget}); first: {first}")]
    ReplicationBudgetExceeded {
        failed: usize,
        total: usize,
        budget: usize,
        first: String,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
