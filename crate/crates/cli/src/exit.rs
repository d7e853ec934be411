//! Process exit codes and the error type that carries one.

use cellplan::Error;

pub const OK: u8 = 0;
/// Infeasible solution, violated constraint or failed comparison.
pub const VIOLATION: u8 = 1;
/// The request exceeds a resource limit.
pub const REFUSED: u8 = 2;
/// Malformed flags, config or input files.
pub const BAD_INPUT: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn bad_input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: BAD_INPUT,
            error: error.into(),
        }
    }

    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: VIOLATION,
            error: error.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::TooLarge { .. } => REFUSED,
            Error::InvalidArgument(_)
            | Error::InvalidConfig(_)
            | Error::Validation(_)
            | Error::Parse(_)
            | Error::SchemaVersion { .. } => BAD_INPUT,
            Error::Io(_) | Error::Csv(_) | Error::Logic(_) => VIOLATION,
        };
        Self { code, error: e.into() }
    }
}

pub type Outcome = std::result::Result<u8, Failure>;
