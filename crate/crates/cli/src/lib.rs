//! Library side of the `qmc` command-line tool: experiment drivers and
//! machine-checkable reports. The binary in `main.rs` is a thin argument
//! layer over these functions.

pub mod experiments;
pub mod report;

use thiserror::Error;

use qmc_core::codec::CodecError;
use qmc_core::gain::RateError;

/// Errors carrying the process exit code: 2 usage, 3 input format, 4 rate
/// matching, 5 internal invariant breach.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Rate(RateError),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Rate(_) => 4,
            CliError::Internal(_) => 5,
        }
    }
}

impl From<qmc_core::image::ImageError> for CliError {
    fn from(e: qmc_core::image::ImageError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<qmc_core::bdm::BdmError> for CliError {
    fn from(e: qmc_core::bdm::BdmError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<qmc_core::qmap::QmapError> for CliError {
    fn from(e: qmc_core::qmap::QmapError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::Config(msg) => CliError::Usage(msg),
            CodecError::Internal(msg) => CliError::Internal(msg),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<RateError> for CliError {
    fn from(e: RateError) -> Self {
        match e {
            RateError::Codec(c) => c.into(),
            other => CliError::Rate(other),
        }
    }
}

pub fn read_file(path: &str) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("{path}: {e}")))
}

pub fn read_text(path: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{path}: {e}")))
}

pub fn write_file(path: &str, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Input(format!("{path}: {e}")))
}
