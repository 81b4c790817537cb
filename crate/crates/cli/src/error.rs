// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("internal invariant failure: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> CliError {
        CliError::Data(format!("{}: {err}", path.display()))
    }

    /// 2 usage, 3 data format, 4 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<dorabella_core::Error> for CliError {
    fn from(err: dorabella_core::Error) -> CliError {
        match err {
            dorabella_core::Error::Config(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}
