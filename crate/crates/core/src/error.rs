use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A query fell outside the domain where the object is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid or incomplete configuration (missing constants, bad parameters).
    #[error("configuration error: {0}")]
    Config(String),
    /// No admissible value exists (e.g. no horizon satisfies a smallness condition).
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// The model, scheme, segment kind or perturbation variant do not fit together.
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    /// Regression design without spread in the regressor.
    #[error("degenerate design: {0}")]
    Degenerate(String),
    /// Requested allocation exceeds the configured cap.
    #[error("size guard: {0}")]
    SizeGuard(String),
    /// A drift or weight evaluation produced a non-finite number.
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
