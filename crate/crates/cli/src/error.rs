use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, arguments or input data.
    #[error("{0}")]
    Config(String),
    /// Cutoff, integrator or other numerical failure.
    #[error("{0}")]
    Numerical(String),
    /// The fit result was written but did not converge.
    #[error("{0}")]
    NotConverged(String),
    /// An oracle comparison exceeded its gate.
    #[error("{0}")]
    GateExceeded(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::GateExceeded(_) => 4,
        }
    }
}

impl From<catsim_core::Error> for CliError {
    fn from(e: catsim_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}
