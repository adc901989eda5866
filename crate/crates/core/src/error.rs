use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid window: {0}")]
    Window(String),

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("moment generating factor diverges at k = {k}")]
    Divergent { k: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("eigensolver failed for replica {replica} (seed {seed}): {source}")]
    Replica {
        seed: u64,
        replica: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
