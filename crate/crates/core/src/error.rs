use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Invalid(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Manifest { path: PathBuf, row: usize, column: String, message: String },

    #[error("duplicate commit {repo_url} {sha} in manifest (rows {first} and {second})")]
    DuplicateCommit { repo_url: String, sha: String, first: usize, second: usize },

    #[error("commit {sha} is not reachable from any ref of {repo}")]
    UnreachableCommit { repo: String, sha: String },

    #[error("git {args}: {message}")]
    Git { args: String, message: String },

    #[error("missing input {0}; run the upstream stage first")]
    MissingArtifact(PathBuf),

    #[error("missing {path}; run `commitscan {producer}` first")]
    MissingStage { path: PathBuf, producer: &'static str },

    #[error("contingency table has an empty {axis} {index}")]
    EmptyMargin { axis: &'static str, index: usize },

    #[error("feature names differ at position {index}: {left} vs {right}")]
    FeatureMismatch { index: usize, left: String, right: String },

    #[error("config: {0}")]
    Config(String),

    #[error("model: {0}")]
    Model(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 1 for bad input or missing upstream artifacts, 2 for
    /// failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_)
            | Error::Manifest { .. }
            | Error::DuplicateCommit { .. }
            | Error::MissingArtifact(_)
            | Error::MissingStage { .. }
            | Error::Config(_)
            | Error::FeatureMismatch { .. }
            | Error::EmptyMargin { .. } => 1,
            _ => 2,
        }
    }
}
