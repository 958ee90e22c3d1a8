use thiserror::Error;

/// Broad failure class, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("outside workspace: {0}")]
    Workspace(String),

    #[error("triad {triad} is not identifiable: {reason}")]
    Unidentifiable { triad: usize, reason: String },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_) | Error::Workspace(_) => ErrorKind::Config,
            Error::NonFinite(_) | Error::Unidentifiable { .. } | Error::Diverged { .. } => {
                ErrorKind::Numeric
            }
            Error::DimensionMismatch { .. }
            | Error::Corrupt(_)
            | Error::Version { .. }
            | Error::Checksum { .. }
            | Error::Io(_) => ErrorKind::Data,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}

pub(crate) fn ensure_finite(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
