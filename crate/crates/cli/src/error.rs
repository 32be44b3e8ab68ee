use nhspec::open_system::OpenSystemError;
use nhspec::scattering::ScatteringError;
use nhspec::sweep::SweepError;
use nhspec::two_level::TwoLevelError;
use nhspec::LinalgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad model file, flags or configuration: exit 2.
    #[error("{0}")]
    Input(String),
    /// The computation itself failed: exit 3.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Numerical(_) => 3,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::DimensionMismatch { .. }
            | LinalgError::Empty
            | LinalgError::NonFinite { .. }
            | LinalgError::SymmetryViolation { .. } => Self::Input(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::InvalidSpec(_) | SweepError::UnknownParameter { .. } | SweepError::InvalidParameter(_) => {
                Self::Input(e.to_string())
            }
            SweepError::Linalg(l) => l.into(),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<OpenSystemError> for CliError {
    fn from(e: OpenSystemError) -> Self {
        match e {
            OpenSystemError::InvalidModel(_) => Self::Input(e.to_string()),
            OpenSystemError::Linalg(l) => l.into(),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<ScatteringError> for CliError {
    fn from(e: ScatteringError) -> Self {
        match e {
            ScatteringError::InvalidModel(_) | ScatteringError::UnderResolved { .. } => Self::Input(e.to_string()),
            ScatteringError::Linalg(l) => l.into(),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<TwoLevelError> for CliError {
    fn from(e: TwoLevelError) -> Self {
        match e {
            TwoLevelError::InvalidParameter(_) | TwoLevelError::DegenerateInput => Self::Input(e.to_string()),
            TwoLevelError::Linalg(l) => l.into(),
            _ => Self::Numerical(e.to_string()),
        }
    }
}
