//! Library half of the `mechlab` binary: typed I/O around the core schemas
//! and the registered experiment pipelines, kept out of `main` so they can
//! be exercised directly in tests.

pub mod experiments;
pub mod io;

/// Process-level outcome of a command: distinguishes usage problems (exit 1)
/// from failed assertions in assertion-style experiments (exit 2).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Assertion(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Assertion(m) => write!(f, "assertion failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Assertion(_) => 2,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<mechlab_core::Error> for CliError {
    fn from(e: mechlab_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
