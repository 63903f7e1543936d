use std::path::PathBuf;

use thiserror::Error;

use crate::grammar::{Attribute, FigureConfiguration};

pub type Result<T, E = RavenError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RavenError {
    #[error("no domain for {attribute:?} on component {component} of {config}")]
    DomainLookup {
        config: FigureConfiguration,
        component: usize,
        attribute: Attribute,
    },

    /// A rule produced a value outside its attribute domain. Pruning should
    /// make this unreachable during generation.
    #[error("{attribute:?} value left its domain: {detail}")]
    DomainOverflow { attribute: Attribute, detail: String },

    #[error("rule {rule} is not applicable to {attribute:?}")]
    InvalidRule { attribute: Attribute, rule: String },

    #[error("rules leave no admissible start value for {attribute:?} on component {component}")]
    Unsatisfiable { component: usize, attribute: Attribute },

    #[error("sampler gave up after {attempts} attempts: {reason}")]
    SamplerStuck { attempts: usize, reason: String },

    #[error("only {available} rule-breaking edits available, need {required}")]
    ForgeFailure { available: usize, required: usize },

    #[error("cannot score candidate: {0}")]
    Scoring(String),

    #[error("{count} candidates tie at the maximum score {score}")]
    Ambiguous { count: usize, score: usize },

    #[error("problem {0} failed the uniqueness gate")]
    NotUnique(String),

    #[error("parse error at token {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("corrupted dataset file {path}: {message}")]
    Corruption { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("png error: {0}")]
    Png(String),
}

impl RavenError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RavenError::Io {
            path: path.into(),
            source,
        }
    }
}
