//! Library surface of the `noisekey` experiment runner: spec parsing,
//! seeded trial execution, and report emission.

pub mod report;
pub mod runner;
pub mod spec;

/// Runner errors, split by exit code: configuration problems exit 1,
/// runtime failures exit 2.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    /// Core errors surfacing while building configurations are the user's
    /// configuration problem.
    pub fn from_core_config(e: noisekey_core::Error) -> Self {
        CliError::Config(e.to_string())
    }

    /// Core errors surfacing mid-run indicate a runner bug or I/O trouble.
    pub fn from_core_run(e: noisekey_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}
