use thiserror::Error;

use crate::linalg::Mat;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("invalid group table: {0}")]
    GroupTable(String),

    #[error("family is not normalized: ‖Σ w x*x − 1‖ = {residual:.3e}")]
    NotNormalized { residual: f64 },

    #[error("not a hyperstate ({reason}): residual {residual:.3e}")]
    InvalidHyperstate { reason: String, residual: f64 },

    #[error("operands live on different GNS spaces")]
    SpaceMismatch,

    #[error("hyperstate is not regular: ‖Σ z z* − 1‖ = {residual:.3e}")]
    NotRegular { residual: f64 },

    #[error("precondition of {op} violated: {report}")]
    Precondition { op: &'static str, report: String },

    #[error("eigenvalue cluster at 1 is not separated: smallest non-null singular value {gap:.3e}, threshold {threshold:.3e}")]
    SpectralGap { gap: f64, threshold: f64 },

    #[error("C*-axiom {axiom} fails with residual {residual:.3e}")]
    CStarAxiom { axiom: &'static str, residual: f64 },

    #[error("density is ill-conditioned: condition number {condition:.3e}")]
    IllConditioned { condition: f64 },

    #[error("routes disagree: {what} ({a:.12e} vs {b:.12e})")]
    RouteDisagreement { what: &'static str, a: f64, b: f64 },

    #[error("no faithful stationary state: minimal eigenvalue {min_eigenvalue:.3e}")]
    NoFaithfulStationary { min_eigenvalue: f64, rho: Box<Mat> },

    #[error("family is not bi-normalized: residual {residual:.3e}")]
    NotBiNormalized { residual: f64 },

    #[error("map is not completely positive: Gram eigenvalue {min_eigenvalue:.3e}")]
    CpViolation { min_eigenvalue: f64 },

    #[error("dimension cap exceeded: stage needs {needed}, cap is {cap}")]
    DimensionCap { needed: usize, cap: usize },

    #[error("state is not stationary: residual {residual:.3e}")]
    NotStationary { residual: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        message: message.into(),
    }
}
