use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid strategy profile: {0}")]
    InvalidProfile(String),

    #[error("arm index {arm} out of range for {k} arms")]
    ArmOutOfRange { arm: usize, k: usize },

    #[error("{name}={value} outside of [0, 1]")]
    Domain { name: &'static str, value: f64 },

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("gap is undefined: {0}")]
    UndefinedGap(&'static str),

    #[error("mechanism {0} requires privileged oracle data: {1}")]
    MissingPrivileged(&'static str, &'static str),

    #[error("inconsistent click outcome: reward present={reward_present} but clicked={clicked}")]
    InconsistentOutcome { clicked: bool, reward_present: bool },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("trace has no per-round records")]
    MissingRecords,

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("{}", config_message(.line, .key, .message))]
    Config {
        line: Option<usize>,
        key: String,
        message: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn config_message(line: &Option<usize>, key: &str, message: &str) -> String {
    match line {
        Some(line) => format!("config line {line}, key `{key}`: {message}"),
        None => format!("config key `{key}`: {message}"),
    }
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}
