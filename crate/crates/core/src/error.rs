use thiserror::Error;

/// Errors raised by the geometry, kinematics, constitutive, dynamics and
/// linearization layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate metric at {point:?}")]
    DegenerateMetric { point: Vec<f64> },

    #[error("point {point:?} lies outside the chart domain")]
    OutsideChart { point: Vec<f64> },

    #[error("chart exit at parameter {parameter}: {point:?}")]
    ChartExit { parameter: f64, point: Vec<f64> },

    #[error("insufficient stencil room at {point:?} (step {step})")]
    InsufficientStencilRoom { point: Vec<f64>, step: f64 },

    #[error("unknown catalog entry '{0}'")]
    UnknownCatalogEntry(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("configuration is not an embedding at time slice {slice}, point {point} (smallest singular value {sigma_min:e})")]
    NotAnEmbedding { slice: usize, point: usize, sigma_min: f64 },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("need at least {required} time slices, have {available}")]
    TooFewTimeSlices { required: usize, available: usize },

    #[error("constitutive density undefined at grid point {point}: {reason}")]
    DomainViolation { point: usize, reason: String },

    #[error("density not twice differentiable: {0}")]
    NotTwiceDifferentiable(String),

    #[error("unstable step at time index {time_index}: norm {norm:e} exceeds bound {bound:e}")]
    UnstableStep { time_index: usize, norm: f64, bound: f64 },

    #[error("degenerate linearization: estimated null-space dimension {null_dim}")]
    DegenerateLinearization { null_dim: usize },

    #[error("linear solve residual {relative:e} above tolerance {tolerance:e}")]
    SolverTolerance { relative: f64, tolerance: f64 },

    #[error("shooting did not converge after {iterations} iterations (residual {residual:e})")]
    ShootingFailed { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
