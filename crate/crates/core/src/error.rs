// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Indices are 1-based.
    #[error("non-finite value at subject {subject}, time {time}, variable {variable}")]
    NonFinite {
        subject: usize,
        time: usize,
        variable: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// `time` is the 1-based global time index of the offending statistic.
    #[error("degenerate variance estimate at t = {time} (sigma^2 = {value:e})")]
    DegenerateVariance { time: usize, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Format(_)
            | Error::Dimension(_)
            | Error::NonFinite { .. }
            | Error::InvalidInput(_) => 2,
            Error::Config(_) => 3,
            Error::DegenerateVariance { .. } | Error::Numerical(_) => 4,
        }
    }
}
