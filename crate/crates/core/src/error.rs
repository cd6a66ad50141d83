use std::path::PathBuf;

use crate::kg::Triple;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no facts: {0}")]
    NoFacts(String),

    #[error("splits not disjoint: {triple:?} appears in both {first} and {second}")]
    SplitsNotDisjoint {
        triple: Triple,
        first: &'static str,
        second: &'static str,
    },

    #[error("negative triple {triple:?} in {split} is a known fact")]
    NegativeIsFact { triple: Triple, split: &'static str },

    #[error("unknown relation {0:?}")]
    UnknownRelation(String),

    #[error("unknown entity {0:?}")]
    UnknownEntity(String),

    #[error("{what} id {id} out of range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        id: usize,
        limit: usize,
    },

    #[error("non-finite loss on batch containing {triples:?}")]
    NonFiniteLoss { triples: Vec<Triple> },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, trace: Vec<f64> },

    #[error("validation set is empty")]
    EmptyValidation,

    #[error("no negatives available for threshold tuning; pass --synth to generate tail corruptions")]
    MissingNegatives,

    #[error("relation {relation} requires entity types but no type file was loaded")]
    MissingEntityTypes { relation: String },

    #[error("cannot corrupt {triple:?}: no candidate entity remains")]
    NoCandidate { triple: Triple },

    #[error("counterfactual {0:?} appears in both validation and test")]
    SplitOverlap(Triple),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

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
