use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fuselab::Error),

    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 2 for filesystem trouble, 1 for everything the user can fix in the
    /// inputs or flags.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_io() => 2,
            _ => 1,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
