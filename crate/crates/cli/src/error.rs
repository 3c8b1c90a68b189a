use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    /// Both sides of a bound were computed exactly and the bound failed, or
    /// exact mode was requested and a check stayed undecided.
    #[error("{0}")]
    TheoremCheck(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Validation(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::TheoremCheck(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

impl From<rkhs_complexity::Error> for CliError {
    fn from(e: rkhs_complexity::Error) -> Self {
        use rkhs_complexity::Error as E;
        if e.is_numerical() || matches!(e, E::WitnessInvalid(_)) {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}
