use crate::store::RelationId;

/// Crate-wide error type.
///
/// Input-shaped errors (`Io`, `Parse`, `EmptyGraph`, `UnknownEntity`,
/// `Config`) map to CLI exit code 2, `Numerical` to exit code 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("empty graph")]
    EmptyGraph,

    #[error("unknown entity '{name}'; nearest vocabulary matches: {}", candidates.join(", "))]
    UnknownEntity {
        name: String,
        candidates: Vec<String>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("episode already finished")]
    EpisodeDone,

    #[error("relation {0} is masked in the current state")]
    MaskedAction(RelationId),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
