use thiserror::Error;

/// Errors raised by the laboratory operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("undefined on singleton: need at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("empty point set")]
    EmptyPointSet,

    #[error("invalid point set: {0}")]
    InvalidPointSet(String),

    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no closed-form transform: {0}")]
    NoClosedFormTransform(&'static str),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("construction trivial: alpha*M^2 = {0} < 1")]
    TrivialHoles(f64),

    #[error("infeasible hole configuration: {0}")]
    Infeasible(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("selection failed for n = {n}: {detail}")]
    SelectionFailed { n: u32, detail: String },

    #[error("interval exceeds covered windows: {0}")]
    WindowExceeded(String),

    #[error("tail bound {bound:e} above tolerance {tolerance:e}; grow window to radius {required}")]
    TailTooLarge {
        bound: f64,
        tolerance: f64,
        required: f64,
    },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("not a measure: {0}")]
    NotAMeasure(String),

    #[error("certificate rejected at n = {n}: {reason}")]
    CertificateRejected { n: u32, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
