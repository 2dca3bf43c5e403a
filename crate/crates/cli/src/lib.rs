//! Library side of the rhospan command-line tool: argument structures,
//! CSV ingestion and the command implementations, kept callable in-process
//! for tests.

pub mod args;
pub mod commands;
pub mod input;

use thiserror::Error;

/// Process exit codes: 0 success, 2 usage (also clap's default), 3 data,
/// 4 numerical failure.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("csv error: {e}"))
    }
}

impl From<rhospan_core::basis::BasisError> for CliError {
    fn from(e: rhospan_core::basis::BasisError) -> Self {
        CliError::Data(format!("basis error: {e}"))
    }
}

impl From<rhospan_core::penalty::PenaltyError> for CliError {
    fn from(e: rhospan_core::penalty::PenaltyError) -> Self {
        CliError::Data(format!("penalty error: {e}"))
    }
}

impl From<rhospan_core::pls::PlsError> for CliError {
    fn from(e: rhospan_core::pls::PlsError) -> Self {
        use rhospan_core::pls::PlsError::*;
        match &e {
            RankDeficientDesign(_) | DimensionMismatch(_) => CliError::Data(e.to_string()),
            NumericallyUnsolvable { .. } | DegenerateEdf { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<rhospan_core::interval::IntervalError> for CliError {
    fn from(e: rhospan_core::interval::IntervalError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<rhospan_core::gridsearch::GridError> for CliError {
    fn from(e: rhospan_core::gridsearch::GridError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<rhospan_core::experiments::ExperimentError> for CliError {
    fn from(e: rhospan_core::experiments::ExperimentError) -> Self {
        CliError::Data(e.to_string())
    }
}
