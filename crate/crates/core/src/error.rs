use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("a TSP instance needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("vertex {vertex} appears more than once in the tour")]
    RepeatedVertex { vertex: usize },

    #[error("vertex {vertex} is missing from the tour")]
    MissingVertex { vertex: usize },

    #[error("vertex {vertex} is out of range for an instance of {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("policy chose an invalid action at step {step}: {action}")]
    InvalidAction { step: usize, action: String },

    #[error("state does not belong to the instance this completion table was built for")]
    InstanceMismatch,

    #[error("state is terminal, no action to take")]
    TerminalState,

    #[error("{method} supports at most {max} vertices, instance has {n}; {hint}")]
    TooLarge {
        method: &'static str,
        n: usize,
        max: usize,
        hint: &'static str,
    },

    #[error("cost lists differ in length: {model} model costs, {reference} reference costs")]
    LengthMismatch { model: usize, reference: usize },

    #[error("reference cost of instance {index} must be positive, got {cost}")]
    NonPositiveReference { index: usize, cost: f64 },

    #[error("instance {index}: model cost {model} is below the optimal cost {reference}")]
    BeatsOptimum {
        index: usize,
        model: f64,
        reference: f64,
    },

    #[error("missing reference solutions for instances: {}", .0.join(", "))]
    MissingReferences(Vec<String>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid heatmap: {0}")]
    InvalidHeatmap(String),

    #[error("{procedure} produced an invalid tour for instance {id}: {reason}")]
    InvalidTour {
        id: String,
        procedure: String,
        reason: String,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Process exit code: 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
