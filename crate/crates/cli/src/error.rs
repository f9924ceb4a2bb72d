use std::fmt;
use std::process::ExitCode;

use interferospec::Error as CoreError;

/// Failure of a command, mapped onto the documented exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, flags or input file: exit 2.
    Input(String),
    /// Simulation, analysis or output failure: exit 3.
    Runtime { stage: String, source: CoreError },
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Input(_) => ExitCode::from(2),
            Self::Runtime { .. } => ExitCode::from(3),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Input(msg) => write!(f, "error: {msg}"),
            Self::Runtime { stage, source } => write!(f, "error in stage `{stage}`: {source}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a stage name to core failures.
pub trait Stage<T> {
    fn stage(self, stage: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Stage<T> for interferospec::Result<T> {
    fn stage(self, stage: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|source| CliError::Runtime {
            stage: stage(),
            source,
        })
    }
}
