use std::path::PathBuf;

use crate::bundle::BundleList;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown item id {0}")]
    UnknownItem(u64),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("user context is empty")]
    EmptyContext,

    #[error("every softmax entry is masked")]
    AllMasked,

    #[error("kernel is singular: pivot {pivot:e} is not positive after jitter")]
    SingularKernel { pivot: f64 },

    #[error("only {} of {wanted} bundles could be selected", .selected.len())]
    ShortList { selected: BundleList, wanted: usize },

    #[error("list of {0} bundles is too short for a pairwise metric")]
    DegenerateList(usize),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("vocabulary hash mismatch: checkpoint has {expected}, data has {found}")]
    VocabMismatch { expected: String, found: String },

    #[error("exhaustive oracle refused: {0}")]
    OracleTooLarge(String),

    #[error("negative pool is empty")]
    EmptyPool,

    #[error("user set is empty")]
    NoUsers,

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
