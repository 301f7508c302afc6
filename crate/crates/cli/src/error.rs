use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Compute(#[from] echolab::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Parse { .. } => "parse",
            Self::Validation { .. } => "validation",
            Self::Io { .. } => "io",
            Self::Usage(_) => "usage",
            Self::Compute(_) => "compute",
        }
    }

    /// Process exit status: 2 for usage and config problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Validation { .. } | Self::Usage(_) => 2,
            Self::Io { .. } | Self::Compute(_) => 1,
        }
    }

    /// `{"error": {"kind", "message", ...}}` with the offending field,
    /// path or position when known.
    pub fn to_json(&self) -> Value {
        let mut body = json!({ "kind": self.kind(), "message": self.to_string() });
        let obj = body.as_object_mut().expect("object literal");
        match self {
            Self::Parse { path, line, column, .. } => {
                obj.insert("path".into(), json!(path.display().to_string()));
                obj.insert("line".into(), json!(line));
                obj.insert("column".into(), json!(column));
            }
            Self::Validation { field, .. } => {
                obj.insert("field".into(), json!(field));
            }
            Self::Io { path, .. } => {
                obj.insert("path".into(), json!(path.display().to_string()));
            }
            Self::Compute(echolab::Error::InvalidParameter { name, .. }) => {
                obj.insert("field".into(), json!(name));
            }
            Self::Usage(_) | Self::Compute(_) => {}
        }
        json!({ "error": body })
    }
}
