use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by a command, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gancmp::Error),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },

    #[error("missing file {0}")]
    Missing(PathBuf),

    #[error("checksum mismatch for {0}")]
    Checksum(PathBuf),

    #[error("malformed report {path}: {reason}")]
    Report { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

impl CliError {
    /// 2 for usage and contract problems, 3 for bad or missing files,
    /// 4 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        use gancmp::Error as E;
        match self {
            CliError::Core(E::Dimension(_) | E::Contract(_) | E::Domain(_)) => EXIT_USAGE,
            CliError::Core(E::Numeric(_) | E::Diverged { .. }) => EXIT_NUMERIC,
            CliError::Core(_) => EXIT_DATA,
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Missing(_) | CliError::Checksum(_) | CliError::Report { .. } | CliError::Io { .. } => EXIT_DATA,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                CliError::Missing(path)
            } else {
                CliError::Io { path, source }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::Core(gancmp::Error::Contract("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(gancmp::Error::Format("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(gancmp::Error::Diverged { step: 3, reason: "nan".into() }).exit_code(), 4);
        assert_eq!(CliError::Checksum("a".into()).exit_code(), 3);
        assert_eq!(CliError::Usage("a".into()).exit_code(), 2);
    }
}
