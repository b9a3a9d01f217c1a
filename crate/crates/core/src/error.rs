use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("number of grid points must be even, got {0}")]
    OddPoints(usize),
    #[error("number of grid points must be a power of two, got {0}")]
    NotPowerOfTwo(usize),
    #[error("need at least {min} grid points, got {found}")]
    TooFewPoints { found: usize, min: usize },
    #[error("half length must be positive and finite, got {0}")]
    NonPositiveHalfLength(f64),
    #[error("expected {expected} samples, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("pole proximity at t={t}, x={x}: |denominator| = {modulus:e}")]
    PoleProximity { t: f64, x: f64, modulus: f64 },
    #[error("no blow-up in this family (alpha = beta, or delta = 0)")]
    NoBlowup,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("invalid stepper configuration: {0}")]
    InvalidConfig(String),
    #[error("end time {t_end} is not after initial time {t0}")]
    EmptyInterval { t0: f64, t_end: f64 },
    #[error("non-finite values produced at t={time}")]
    NonFinite { time: f64 },
    #[error("insufficient tail for blow-up extrapolation: {0}")]
    InsufficientTail(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    AtLine { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("conflicting initial data: {0}")]
    ConflictingInitialData(String),
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
}
