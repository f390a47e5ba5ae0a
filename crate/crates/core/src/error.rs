use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI exit codes and the HTTP error codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Infeasible,
    Ordering,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("missing {0}")]
    Missing(String),

    #[error("{0}")]
    Scope(ValidationReport),

    #[error("format error at line {line}, column {column}: {message}")]
    Format {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("target {target} is unreachable; maximum achievable ratio is {max_achievable}")]
    Infeasible { target: f64, max_achievable: f64 },

    #[error("exhaustive search over {size} combinations exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    #[error("snapshot taken at {taken_at} does not follow the previous snapshot taken at {previous}")]
    Ordering { taken_at: String, previous: String },

    #[error("corrupt snapshot record at line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn missing(field: impl Into<String>) -> Self {
        Error::Missing(field.into())
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Invalid { .. }
            | Error::Missing(_)
            | Error::Scope(_)
            | Error::Format { .. }
            | Error::SearchSpaceTooLarge { .. }
            | Error::CorruptRecord { .. } => ErrorKind::Validation,
            Error::Infeasible { .. } => ErrorKind::Infeasible,
            Error::Ordering { .. } => ErrorKind::Ordering,
            Error::Io(_) => ErrorKind::Io,
        }
    }

    /// Prefixes the field path of a validation error, so nested errors point at
    /// the offending element (`rates.ds` becomes `assessments.Security.rates.ds`).
    pub fn within(self, prefix: &str) -> Self {
        match self {
            Error::Invalid { field, reason } => Error::Invalid {
                field: format!("{prefix}.{field}"),
                reason,
            },
            Error::Missing(field) => Error::Missing(format!("{prefix}.{field}")),
            other => other,
        }
    }
}

/// One broken invariant, located by a dotted path into the document.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

/// Result of structural validation. Empty means valid.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Scope(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scope validation failed with {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "; {}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}
