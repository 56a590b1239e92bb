use dibgeo_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Data(#[from] Error),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("some outputs failed: {0}")]
    Partial(String),

    #[error("{failed} of {total} solves did not converge (limit {limit})")]
    NonConvergence { failed: usize, total: usize, limit: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(Error::UnknownPreset { .. } | Error::InvalidArgument(_)) => 1,
            CliError::Data(_) | CliError::Io(_) | CliError::Partial(_) => 2,
            CliError::NonConvergence { .. } => 3,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}
