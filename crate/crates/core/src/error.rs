use std::io;

use thiserror::Error;

/// Errors produced anywhere in the similarity engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sentence")]
    EmptySentence,

    #[error("format error{}: {message}", line_suffix(*.line))]
    Format {
        line: Option<usize>,
        message: String,
    },

    #[error("corpus has no sentence pairs")]
    EmptyCorpus,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("expected binary labels, found graded")]
    LabelKind,

    #[error("training data needs both labels present")]
    DegenerateData,

    #[error("nothing to evaluate")]
    EmptyEval,

    #[error("correlation undefined: zero variance")]
    UndefinedCorrelation,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(n) => format!(" at line {n}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn format(message: impl Into<String>) -> Self {
        Error::Format {
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn format_at(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line: Some(line),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a line number to a format error that lacks one.
    pub(crate) fn at_line(self, line: usize) -> Self {
        match self {
            Error::Format {
                line: None,
                message,
            } => Error::Format {
                line: Some(line),
                message,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
