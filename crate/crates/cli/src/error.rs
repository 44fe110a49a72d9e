use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    /// The fit ran but did not converge; its output has been written.
    #[error("{0}")]
    FitNotConverged(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::FitNotConverged(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::FitNotConverged(_) => "fit_not_converged",
            CliError::Runtime(_) => "runtime",
        }
    }
}

impl From<qkr_core::Error> for CliError {
    fn from(e: qkr_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}
