//! Error type of the command-line tool and its exit codes.

use std::path::PathBuf;

use thiserror::Error;
use twostrain_core::bifurcation::BifurcationError;
use twostrain_core::data::DataError;
use twostrain_core::dynamics::IntegrationError;
use twostrain_core::equilibria::EquilibriumError;
use twostrain_core::fitting::FitError;
use twostrain_core::model::{ParamError, StateError};
use twostrain_core::phase::PhaseError;
use twostrain_core::reproduction::ReproductionError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Output { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Output { path: path.into(), source }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<StateError> for CliError {
    fn from(e: StateError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ReproductionError> for CliError {
    fn from(e: ReproductionError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<IntegrationError> for CliError {
    fn from(e: IntegrationError) -> Self {
        match e {
            IntegrationError::NonFiniteState { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EquilibriumError> for CliError {
    fn from(e: EquilibriumError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<PhaseError> for CliError {
    fn from(e: PhaseError) -> Self {
        match e {
            PhaseError::EmptyGrid => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<BifurcationError> for CliError {
    fn from(e: BifurcationError) -> Self {
        match e {
            BifurcationError::Reproduction(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::IncompleteWindow { .. }
            | FitError::ShareOutOfRange { .. }
            | FitError::LengthMismatch { .. }
            | FitError::EmptyData => CliError::Data(e.to_string()),
            FitError::ConstraintViolated { .. } | FitError::StepMisaligned(_) => CliError::Config(e.to_string()),
            FitError::IntegrationFailed(_) => CliError::Numerical(e.to_string()),
        }
    }
}
