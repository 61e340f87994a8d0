use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("mode not found after {iterations} iterations (gradient max-norm {grad_norm:.3e})")]
    ModeNotFound { iterations: usize, grad_norm: f64 },

    /// Latent-field Newton iteration did not converge. The best point seen is attached.
    #[error("latent mode did not converge after {iterations} iterations (gradient max-norm {grad_norm:.3e})")]
    LatentNonconvergence {
        iterations: usize,
        grad_norm: f64,
        best: Vec<f64>,
    },

    #[error("hyperparameter mode search failed: {0}")]
    HyperNonconvergence(String),

    #[error("non-finite value in {term}")]
    NonFinite { term: String },

    #[error("subject {id}: {source}")]
    Subject {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("MCMC divergence at iteration {iteration}: non-finite log density (state: {state:?})")]
    Divergence { iteration: usize, state: Vec<f64> },

    #[error("{file}:{line}: {message}")]
    Input {
        file: String,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn for_subject(self, id: &str) -> Self {
        Error::Subject {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    /// Input and configuration problems, as opposed to numerical failures.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Input { .. }
            | Error::Config(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::DimensionMismatch { .. } => true,
            Error::Subject { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
