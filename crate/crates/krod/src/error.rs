//! Error types shared across the crate.

use thiserror::Error;

/// Coarse failure class, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Invalid configuration or arguments.
    Config,
    /// Numerical failure (precondition violation, rank deficiency, divergence, ...).
    Numerical,
    /// Filesystem or serialization failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature order {0} is out of range (1..={max})", max = crate::quadrature::MAX_ORDER)]
    QuadratureOrder(usize),

    #[error("integrand returned a non-finite value {value} at node {index} (x = {node})")]
    NonFiniteIntegrand { index: usize, node: f64, value: f64 },

    #[error("exact solution requires t > 0 (got t = {0}); take the initial condition instead")]
    NonPositiveTime(f64),

    #[error("x = {x} lies outside the spatial domain [0, {length}]")]
    OutOfDomain { x: f64, length: f64 },

    #[error("quadrature denominator underflowed ({0:e}); integrand exponents exceed rescaling range")]
    OverflowGuard(f64),

    #[error("snapshot column {column} (t = {time}) failed: {source}")]
    Snapshot {
        column: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("target rank {k} out of range 2..={max} for a {nrows}x{ncols} matrix")]
    RankOutOfRange { k: usize, max: usize, nrows: usize, ncols: usize },

    #[error("input matrix contains a non-finite entry at ({row}, {col})")]
    NonFiniteMatrix { row: usize, col: usize },

    #[error("randomized sketch produced dependent columns after {0} attempts")]
    SketchDeficient(usize),

    #[error("sigma_{k}/sigma_1 = {ratio:e} is below the 1e-12 invertibility threshold; lower k")]
    SigmaThreshold { k: usize, ratio: f64 },

    #[error("matrix shapes disagree: {0}")]
    ShapeMismatch(String),

    #[error("snapshot matrix needs at least 2 columns to form shifted pairs (got {0})")]
    TooFewSnapshots(usize),

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error("similarity is undefined: {0} has zero norm")]
    ZeroNormField(&'static str),

    #[error("series of length {len} is too short for lag structure requiring {required} samples")]
    SeriesTooShort { len: usize, required: usize },

    #[error("training loss became non-finite at iteration {0}")]
    NonFiniteLoss(usize),

    #[error("optimizer diverged: loss increased over {0} consecutive checks")]
    OptimizerDiverged(usize),

    #[error("one-step simulation horizon {horizon} exceeds available data ({available})")]
    HorizonExceedsData { horizon: usize, available: usize },

    #[error("requested time {0} precedes the model start time {1}")]
    TimeBeforeStart(f64, f64),

    #[error("time series is too short for two-fold validation (need >= 9 columns, got {0})")]
    FoldsDegenerate(usize),

    #[error("correlation is undefined: {0} field has zero variance")]
    ZeroVariance(&'static str),

    #[error("mode column {0} has zero norm")]
    ZeroModeColumn(usize),

    #[error("pipeline stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    pub fn stage(stage: &'static str, source: Error) -> Self {
        Error::Stage { stage, source: Box::new(source) }
    }

    /// Classifies the error for process exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) => ErrorCategory::Config,
            Error::Io { .. } | Error::Format { .. } => ErrorCategory::Io,
            Error::Stage { source, .. } => source.category(),
            Error::Snapshot { source, .. } => source.category(),
            _ => ErrorCategory::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
