use std::path::Path;

use mgcoop::coordination::CoordinationError;
use mgcoop::dispatch::DispatchError;
use mgcoop::grid::GridError;
use mgcoop::rl::RlError;
use mgcoop::scenario::ScenarioError;
use thiserror::Error;

/// A failed command, classified by its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad inputs: malformed files, rejected values, an oversized oracle grid.
    #[error("{0}")]
    Validation(String),
    /// A numerical method failed or a result did not pass its audit.
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => CliError::Io(e.to_string()),
            ScenarioError::Grid(g) => g.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::Divergence { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DispatchError> for CliError {
    fn from(e: DispatchError) -> Self {
        match e {
            DispatchError::Invalid(_) | DispatchError::Domain(_) => CliError::Validation(e.to_string()),
            DispatchError::Grid(g) => g.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<RlError> for CliError {
    fn from(e: RlError) -> Self {
        match e {
            RlError::Io { .. } => CliError::Io(e.to_string()),
            RlError::Checkpoint { .. } | RlError::Invalid(_) => CliError::Validation(e.to_string()),
            RlError::Dimension { .. } => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CoordinationError> for CliError {
    fn from(e: CoordinationError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}
