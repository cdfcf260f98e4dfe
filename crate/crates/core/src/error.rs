use std::io;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("tape does not belong to this network")]
    StaleTape,

    /// A loss, gradient or parameter became NaN or infinite.
    #[error("non-finite value encountered: {0}")]
    Diverged(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("every restart of the attack failed")]
    AllRestartsFailed,

    #[error("direct projection cannot attack a group of {0} instances")]
    GroupNotSupported(usize),

    #[error("ROC needs both members and nonmembers (got {members} members, {nonmembers} nonmembers)")]
    SingleClass { members: usize, nonmembers: usize },

    #[error("exhaustive search over {0} subsets exceeds the guard")]
    TooManySubsets(u128),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("dataset exhausted after {selected} of {wanted} selections")]
    DatasetExhausted { selected: usize, wanted: usize },

    #[error("malformed IDX file: {0}")]
    Idx(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
