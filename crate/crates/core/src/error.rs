use thiserror::Error;

/// Errors raised by the planning lab.
#[derive(Debug, Error)]
pub enum LabError {
    /// An enumeration or construction would exceed a configured size limit,
    /// or the requested quantity cannot be realized at the requested size.
    #[error("sizing error: {0}")]
    Sizing(String),

    /// The model violates one or more structural invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An estimate was requested before any simulation was run.
    #[error("estimate undefined: no simulations have been run")]
    UndefinedEstimate,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A bound evaluator was called with inputs it cannot use.
    #[error("bound undefined: {0}")]
    UndefinedBound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
