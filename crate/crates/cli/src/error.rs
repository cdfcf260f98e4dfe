use std::io;
use std::path::Path;

use comember::Error;

/// Validation problems (bad config, infeasible experiment).
pub const EXIT_VALIDATION: i32 = 2;
/// Training or attack optimisation produced non-finite values.
pub const EXIT_DIVERGENCE: i32 = 3;
/// Files could not be read or written, or failed their integrity check.
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },

    /// A recorded file is missing or no longer matches its hash.
    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("run is incomplete: {0}")]
    Incomplete(String),

    #[error(transparent)]
    Core(#[from] Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Incomplete(_) => EXIT_VALIDATION,
            CliError::Io { .. } | CliError::Integrity(_) => EXIT_IO,
            CliError::Core(e) => match e {
                Error::Diverged(_) | Error::AllRestartsFailed => EXIT_DIVERGENCE,
                Error::Io(_) | Error::Idx(_) | Error::Checkpoint(_) => EXIT_IO,
                _ => EXIT_VALIDATION,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_code_mapping() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(Error::Diverged("loss".into())).exit_code(), 3);
        assert_eq!(CliError::Core(Error::AllRestartsFailed).exit_code(), 3);
        assert_eq!(CliError::Integrity("x".into()).exit_code(), 4);
        assert_eq!(CliError::Core(Error::Checkpoint("x".into())).exit_code(), 4);
        assert_eq!(CliError::Core(Error::InfeasibleSplit("x".into())).exit_code(), 2);
        let e = CliError::io(Path::new("a"), io::Error::other("boom"));
        assert_eq!(e.exit_code(), 4);
    }
}
