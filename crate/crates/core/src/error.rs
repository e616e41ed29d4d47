use thiserror::Error;

use crate::qubo::Var;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable {0} missing from sample")]
    MissingVariable(Var),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("variable sets overlap (e.g. variable {0})")]
    OverlappingVariables(Var),

    #[error("indicator model is all zero; scale constant undefined")]
    ZeroIndicator,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("unknown node {0}")]
    UnknownNode(Var),

    #[error("clique of size {requested} exceeds construction capacity {max}")]
    Capacity { requested: usize, max: usize },

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("value {0} outside [0, 1]")]
    OutOfUnitRange(f64),

    #[error("not ready: {0}")]
    NotReady(String),

    #[error("unknown backend '{0}'")]
    UnknownBackend(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.into().at_stage(stage))
    }
}
