use carnot::CarnotError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 3 for bad input, 4 for numerical or conditioning failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<CarnotError> for CliError {
    fn from(e: CarnotError) -> Self {
        match e {
            CarnotError::DimensionMismatch { .. }
            | CarnotError::Domain(_)
            | CarnotError::Unsupported(_)
            | CarnotError::Io(_) => CliError::Input(e.to_string()),
            CarnotError::SingularPoint { .. }
            | CarnotError::EmptyDomain(_)
            | CarnotError::Precision { .. }
            | CarnotError::Conditioning(_)
            | CarnotError::Infeasible(_)
            | CarnotError::Data { .. } => CliError::Numerical(e.to_string()),
        }
    }
}
