//! Error type shared across the crate.
//!
//! Errors are grouped into three kinds so that callers (in particular the
//! CLI) can map them onto distinct exit codes: configuration problems,
//! bad or missing input data, and failures at run time.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorKind::Config => write!(f, "config"),
            ErrorKind::Data => write!(f, "data"),
            ErrorKind::Runtime => write!(f, "runtime"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{kind} error: {msg}")]
pub struct Error {
    pub kind: ErrorKind,
    pub msg: String,
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error { kind: ErrorKind::Config, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error { kind: ErrorKind::Data, msg: msg.into() }
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Error { kind: ErrorKind::Runtime, msg: msg.into() }
    }

    /// Exit code contract: 0 success, 2 config error, 3 data error, 4 runtime failure.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Runtime => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::data(format!("io: {e}"))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::data(format!("json: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
