use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown category label {0:?}")]
    UnknownCategory(String),

    #[error("invalid data: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("undefined profile: {0}")]
    UndefinedProfile(String),

    #[error("profiles are defined over different category sets")]
    CategoryMismatch,

    #[error("risk reduction is undefined for an initial risk of {0}")]
    UndefinedReduction(f64),

    #[error("infeasible forgery objective: {0}")]
    Infeasible(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::UndefinedReduction(_) | Error::Infeasible(_) => ErrorClass::Numeric,
            Error::Parse { .. }
            | Error::UnknownCategory(_)
            | Error::Validation(_)
            | Error::UndefinedProfile(_)
            | Error::CategoryMismatch
            | Error::Io { .. } => ErrorClass::Data,
        }
    }
}
