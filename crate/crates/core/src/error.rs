use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A loss or log-density evaluated to NaN; `index` is the offending
    /// observation in the dataset.
    #[error("non-finite {what} at observation {index}")]
    NonFinite { what: &'static str, index: usize },

    /// Too many bootstrap chains rejected every proposal.
    #[error("{degenerate} of {total} bootstrap chains are degenerate (zero acceptance)")]
    DegenerateChains { degenerate: usize, total: usize },

    #[error("{failed} of {total} replications failed")]
    StudyFailure { failed: usize, total: usize },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
