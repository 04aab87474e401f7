use soliton_lab::energy::EnergyError;
use soliton_lab::geometry::GeometryError;
use soliton_lab::ma::MaError;
use soliton_lab::profile::{GridError, ProfileError, SpecError};
use soliton_lab::spectral::SpectralError;
use soliton_lab::verification::VerificationError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("verification failed: {}", .0.join("; "))]
    Verification(Vec<String>),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Solver(_) => 2,
            CliError::Verification(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::InsufficientRange(_) | ProfileError::Tolerance(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::InvalidInput(_) | SpectralError::SpectrumTooShort(_) => CliError::Config(e.to_string()),
            SpectralError::Profile(inner) => inner.into(),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<MaError> for CliError {
    fn from(e: MaError) -> Self {
        match e {
            MaError::InvalidProblem(_) => CliError::Config(e.to_string()),
            MaError::Violation(_) | MaError::InsufficientFarField(_) | MaError::DegenerateFit => {
                CliError::Verification(vec![e.to_string()])
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<EnergyError> for CliError {
    fn from(e: EnergyError) -> Self {
        match e {
            EnergyError::InvalidPath(_) => CliError::Config(e.to_string()),
            EnergyError::Potential(inner) => inner.into(),
            EnergyError::Divergent { .. } => CliError::Solver(e.to_string()),
        }
    }
}

impl From<VerificationError> for CliError {
    fn from(e: VerificationError) -> Self {
        match e {
            VerificationError::Profile(inner) => inner.into(),
            VerificationError::Geometry(inner) => inner.into(),
        }
    }
}
