use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the workbench.
///
/// Every variant maps onto a short machine-parsable class via [`Error::class`],
/// which the CLI prints as the first token of its single-line error report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error in {field}: {message}")]
    Config { field: String, message: String },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps `self` with a human-readable context prefix (facet, fold, file...).
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Stable class name of the innermost error.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Config { .. } => "config",
            Error::Parse { .. } => "parse",
            Error::Data(_) => "data",
            Error::Training(_) => "training",
            Error::Dimension { .. } => "dimension",
            Error::Context { source, .. } => source.class(),
            Error::Io { .. } => "io",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_sees_through_context() {
        let e = Error::Training("diverged".into())
            .context("fold 3")
            .context("facet Order");
        assert_eq!(e.class(), "training");
        assert_eq!(
            e.to_string(),
            "facet Order: fold 3: training error: diverged"
        );
    }
}
