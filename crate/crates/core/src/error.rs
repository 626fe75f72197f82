use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A conditional variance or pivot fell below its floor. `dim` is the
    /// zero-based dimension being conditioned when it is known.
    #[error("degenerate covariance{}: {detail}", .dim.map(|d| format!(" at dimension {d}")).unwrap_or_default())]
    DegenerateCovariance { dim: Option<usize>, detail: String },

    #[error("cannot resample: no particle was accepted")]
    EmptyEnsemble,

    #[error("no sample accepted at dimension {dim} out of {samples}; increase the number of samples per dimension")]
    DimensionFailure { dim: usize, samples: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("all {0} hyperparameter fits failed")]
    AllFitsFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(dim: Option<usize>, detail: impl Into<String>) -> Self {
        Error::DegenerateCovariance {
            dim,
            detail: detail.into(),
        }
    }
}
