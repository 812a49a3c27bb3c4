use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("model evaluation failed at {point:?}: {source}")]
    ModelEvaluation {
        point: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("integration failure at t = {time}: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    #[error("root finding failed after {iterations} iterations (A = {a}, z = {z}, residual = {residual:e})")]
    RootFailure {
        iterations: usize,
        a: f64,
        z: f64,
        residual: f64,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors produced by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IntegrationFailure { .. } | Error::RootFailure { .. } | Error::ModelEvaluation { .. }
        )
    }
}
