use std::fmt;

use serde::Serialize;
use thermoshape::Error;

/// Failure class of a run, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Config,
    Numerical,
    Io,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Numerical => 3,
            FailureKind::Io => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: FailureKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Config,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Numerical,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Io,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// Single-line JSON record for stderr.
    pub fn to_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            status: &'static str,
            kind: FailureKind,
            exit_code: i32,
            message: &'a str,
        }
        serde_json::to_string(&Line {
            status: "error",
            kind: self.kind,
            exit_code: self.exit_code(),
            message: &self.message,
        })
        .unwrap_or_else(|_| format!("{{\"status\":\"error\",\"exit_code\":{}}}", self.exit_code()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Io(_) => FailureKind::Io,
            Error::Mismatch(_) | Error::InvalidMesh(_) => FailureKind::Numerical,
            e if e.is_numerical() => FailureKind::Numerical,
            _ => FailureKind::Config,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            kind: FailureKind::Io,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Self {
                kind: FailureKind::Io,
                message: e.to_string(),
            }
        } else {
            Self::config(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
