use std::fmt::Display;
use std::path::Path;

use auction_core::error::{ClearingError, ImpactError, RegimeError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{context}: {source}")]
    Core {
        context: String,
        source: auction_core::Error,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    /// An input file that could not be opened.
    #[error("{context}: {source}")]
    Input {
        context: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    /// 3: unreadable or inconsistent input, 4: book does not cross,
    /// 5: too few points for a fit, 1: anything else.
    pub fn exit_code(&self) -> i32 {
        use auction_core::Error as E;
        match self {
            CliError::Core { source, .. } => match source {
                E::Parse(_) | E::Book(_) | E::Flow(_) => 3,
                E::Clearing(ClearingError::NoCross)
                | E::Impact(ImpactError::Clearing(_))
                | E::Regime(RegimeError::Impact(ImpactError::Clearing(_))) => 4,
                E::Regime(RegimeError::TooFewPoints { .. }) => 5,
                _ => 1,
            },
            CliError::Io { .. } => 1,
            CliError::Input { .. } | CliError::Invalid(_) => 3,
        }
    }
}

pub trait Context<T> {
    fn ctx(self, context: impl Display) -> Result<T, CliError>;
}

impl<T, E: Into<auction_core::Error>> Context<T> for Result<T, E> {
    fn ctx(self, context: impl Display) -> Result<T, CliError> {
        self.map_err(|e| CliError::Core {
            context: context.to_string(),
            source: e.into(),
        })
    }
}

pub fn io_ctx<T>(r: std::io::Result<T>, path: &Path) -> Result<T, CliError> {
    r.map_err(|source| CliError::Io {
        context: path.display().to_string(),
        source,
    })
}

pub fn input_ctx<T>(r: std::io::Result<T>, path: &Path) -> Result<T, CliError> {
    r.map_err(|source| CliError::Input {
        context: path.display().to_string(),
        source,
    })
}
