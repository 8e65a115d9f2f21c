use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller supplied data with the wrong shape, length, or value range.
    #[error("input error: {0}")]
    Input(String),

    /// An operation was invoked out of order, e.g. backward before forward.
    #[error("state error: {0}")]
    State(String),

    #[error("invalid architecture: {0}")]
    Spec(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Training {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("{}:{line}: {detail}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        detail: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("incompatible model format version {found} (this build reads version {supported})")]
    IncompatibleVersion { found: u32, supported: u32 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
