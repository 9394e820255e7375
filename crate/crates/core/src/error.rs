use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown capture condition `{0}`")]
    UnknownCondition(String),

    #[error("scene is for scenario {scene} but spec is {spec}")]
    ScenarioMismatch { scene: String, spec: String },

    #[error("token `{token}` is not in the {field} vocabulary of {scenario}")]
    OutOfVocabulary {
        scenario: String,
        field: &'static str,
        token: String,
    },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("could not realize {target} for {scenario} within {attempts} attempts")]
    Generation {
        scenario: String,
        target: String,
        attempts: usize,
    },

    #[error("inconsistent split counts: {0}")]
    InconsistentCounts(String),

    #[error("render error: {0}")]
    Render(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("text is empty after normalization")]
    EmptyText,

    #[error("no editable slot has a non-empty contradiction pool")]
    EmptyPool,

    #[error("description backend: {0}")]
    Backend(String),

    #[error("no record for `{0}`")]
    MissingRecord(String),

    #[error("pooled embedding has zero norm")]
    ZeroNorm,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("reference library is empty")]
    EmptyLibrary,

    #[error("AUROC needs both classes (normal: {normal}, anomaly: {anomaly})")]
    SingleClass { normal: usize, anomaly: usize },

    #[error("aggregate input: {0}")]
    Aggregate(String),

    #[error("bad file format in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
