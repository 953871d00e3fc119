use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments (exit code 2).
    #[error("{0}")]
    Invalid(String),
    /// A verification check did not hold (exit code 1).
    #[error("{0}")]
    Failed(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] detsched_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Core(detsched_core::Error::InvalidArgument(_) | detsched_core::Error::SizeLimit { .. }) => 2,
            CliError::Core(detsched_core::Error::InvalidKernel(_)) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
