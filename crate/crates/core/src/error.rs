use thiserror::Error;

use crate::numkernel::Inertia;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    Asymmetric(f64),

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("Lyapunov system is singular: eigenvalues {i} and {j} sum to {re:.3e}{im:+.3e}i")]
    Resonance { i: usize, j: usize, re: f64, im: f64 },

    #[error("order k = {k} out of range for dimension {n}")]
    OrderOutOfRange { k: usize, n: usize },

    #[error("shift {mu} lies on the real-part set of the spectrum")]
    ShiftOnSpectrum { mu: f64 },

    #[error("system is not {k}-contractive (sum of top-{k} real parts = {margin:.6e})")]
    NotContractive { k: usize, margin: f64 },

    #[error("pair is not {k}-order stabilizable: {reason}")]
    NotStabilizable { k: usize, reason: String },

    #[error("rate selection failed after {attempts} attempts: {reason}")]
    RateSelection { attempts: usize, reason: String },

    #[error("coupling scale search exhausted after {halvings} halvings (margin {margin:.3e})")]
    KappaExhausted { halvings: usize, margin: f64 },

    #[error("{label}: expected inertia {expected}, found {found}")]
    InertiaMismatch {
        label: String,
        expected: Inertia,
        found: Inertia,
    },

    #[error("{0} must be positive definite")]
    NotPositiveDefinite(String),

    #[error("matrix {0} is singular")]
    Singular(String),

    #[error("gain scale rho = {0} must be >= 1")]
    InvalidRho(f64),

    #[error("certificate matrices are not colinear (deviation {0:.3e})")]
    NotColinear(f64),

    #[error("envelope has {terms} terms; vertex enumeration is capped at 16 (use grid sampling)")]
    TooManyTerms { terms: usize },

    #[error("envelope mismatch at x = {point:?}: deviation {deviation:.3e}")]
    EnvelopeMismatch { point: Vec<f64>, deviation: f64 },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json error at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
