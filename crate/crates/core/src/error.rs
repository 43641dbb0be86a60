use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("malformed xml at byte {offset}: {message}")]
    Xml { offset: u64, message: String },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("candidate {key} does not belong to thread {question_id}")]
    ThreadMismatch { key: String, question_id: u64 },

    #[error("key present in only one feature source: {0}")]
    UnmatchedKey(String),

    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: usize },

    #[error("feature {0} has a non-finite value")]
    NonFiniteFeature(String),

    #[error("training data contains only one class")]
    SingleClass,

    #[error("incompatible feature registries: {0}")]
    IncompatibleRegistry(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact {path}; run `{producer}` first")]
    MissingArtifact { path: PathBuf, producer: &'static str },

    #[error("config hash mismatch in {path}: expected {expected}, found {found}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
}

impl Error {
    /// Errors caused by input, configuration or missing artifacts, as opposed
    /// to failures inside the tool.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Diverged { .. } | Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
