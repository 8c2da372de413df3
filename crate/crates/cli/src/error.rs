use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("{path}:{line}:{column}: {message}")]
    Config { path: PathBuf, line: usize, column: usize, message: String },

    #[error("expression '{field}' at column {column}: {message}")]
    Expression { field: String, column: usize, message: String },

    #[error("{module}: {source} [parameters: {params}]")]
    Numerical { module: &'static str, params: String, source: oscihom::Error },

    #[error("undetermined direction rejected by --strict: {0}")]
    Strict(String),

    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),
}

/// Attaches the failing module and its parameters to a library error.
pub trait Ctx<T> {
    fn ctx<P: FnOnce() -> String>(self, module: &'static str, params: P) -> Result<T, CliError>;
}

impl<T> Ctx<T> for oscihom::Result<T> {
    fn ctx<P: FnOnce() -> String>(self, module: &'static str, params: P) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numerical { module, params: params(), source })
    }
}
