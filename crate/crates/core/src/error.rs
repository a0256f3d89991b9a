use thiserror::Error;

/// Errors raised by the deconvolution solvers and their plumbing.
#[derive(Debug, Error)]
pub enum DeconvError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid contour: {0}")]
    InvalidContour(String),

    #[error("resolvent is singular at lambda = {re} + {im}i (sector assumption violated)")]
    SingularResolvent { re: f64, im: f64 },

    #[error("missing prior: {0}")]
    MissingPrior(String),

    #[error("|K(lambda)| = {magnitude:e} is numerically zero at mu = {mu}")]
    NearZeroSymbol { mu: f64, magnitude: f64 },

    #[error("contour under-resolved at t = {t}: imaginary residue {residue:e} (increase mu_max or n_quad)")]
    ContourResolution { t: f64, residue: f64 },

    #[error("differentiation step {step} is not smaller than the horizon {horizon}")]
    StepTooLarge { step: f64, horizon: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("invalid exponent {0}: must lie in (0, 1)")]
    InvalidExponent(f64),

    #[error("non-positive diagonal {diagonal} in second-kind solve (refine the grid)")]
    StepSize { diagonal: f64 },

    #[error("no convergence after {iterations} iterations (last update {last_update:e})")]
    NoConvergence { iterations: usize, last_update: f64 },

    #[error("residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("decomposition inapplicable: {0}")]
    DecompositionInapplicable(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("regularization parameter alpha must be positive")]
    DivisionByZero,

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("incomplete problem spec: {0}")]
    IncompleteSpec(String),

    #[error("constants not certified for {0}; supply d explicitly")]
    NotCertified(String),

    #[error("rate fit needs at least {needed} distinct deltas, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DeconvError>;
