use std::path::{Path, PathBuf};

use crate::cnf::ParseError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Dimacs {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("trail format, line {line}: {message}")]
    TraceFormat { line: usize, message: String },
    #[error("token stream: {0}")]
    TokenFormat(String),
    #[error("literal {lit} is outside 1..={num_vars}")]
    LiteralOutOfRange { lit: i32, num_vars: u32 },
    #[error("permutation covers {perm} variables, input needs {needed}")]
    PermutationDomain { perm: u32, needed: u32 },
    #[error("behavior cloning needs at least one probe")]
    EmptyProbeSet,
    #[error("no instance has a nonzero baseline propagation count")]
    NoBaseline,
    #[error("invalid model file: {0}")]
    ModelFormat(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Stdio(#[from] std::io::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Error {
        Error::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
