use spraylab::SprayError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// A verification suite failed.
    pub const VERIFY_FAILED: u8 = 1;
    /// Bad command line or configuration.
    pub const USAGE: u8 = 2;
    /// Reading or writing files failed.
    pub const IO: u8 = 3;
    /// A numerical operation failed.
    pub const COMPUTATION: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("computation failed: {0}")]
    Computation(#[from] SprayError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit::USAGE,
            CliError::Io(_) => exit::IO,
            CliError::Computation(_) => exit::COMPUTATION,
        }
    }
}
