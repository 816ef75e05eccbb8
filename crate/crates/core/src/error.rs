use thiserror::Error;

/// Errors raised by the numeric routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid product space: {0}")]
    InvalidSpace(String),

    #[error("product space has {size} states, above the cap of {cap}")]
    SpaceTooLarge { size: usize, cap: usize },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("relative entropy undefined: p[{index}] = {p} > 0 but q[{index}] = 0")]
    AbsoluteContinuityViolation { index: usize, p: f64 },

    #[error("invalid order {0}")]
    InvalidOrder(f64),

    #[error("exponent must be positive, got {0}")]
    NonpositiveTheta(f64),

    #[error("tilting index must lie in [0, 1], got {0}")]
    InvalidTiltIndex(f64),

    #[error("geometric mean has empty support")]
    EmptyGeometricMean,

    #[error("partition function vanishes")]
    VanishingPartitionFunction,

    #[error("conditional row {row} is undefined but carries mass {mass}")]
    UndefinedConditionalRow { row: usize, mass: f64 },

    #[error("invalid temperature schedule: {0}")]
    InvalidSchedule(String),

    #[error("matrix is not symmetric (max asymmetry {0})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("conditioning block is singular")]
    SingularConditioningBlock,

    #[error("keep set is empty")]
    EmptyKeepSet,

    #[error("invalid block partition: {0}")]
    InvalidPartition(String),

    #[error("energy curvature has eigenvalue {0} below the PSD floor")]
    IndefiniteEnergy(f64),

    #[error("posterior precision is not positive definite")]
    IndefinitePosterior,

    #[error("operation requires a decimation chain")]
    NotDecimation,

    #[error("oracle did not converge after {iterations} iterations (stationarity gap {gap})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("quadrature grid leaks mass: boundary density ratio {0}")]
    MassLeakage(f64),

    #[error("spectral norm of layer {layer} is {norm}, above 1/d = {limit}")]
    SpectralNormViolated { layer: usize, norm: f64, limit: f64 },

    #[error("divergence term {index} is negative ({value})")]
    NegativeDivergenceInput { index: usize, value: f64 },

    #[error("teacher depth d/M = {0} is not a positive integer")]
    NonIntegerTeacherDepth(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
