use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown symbol: {0}")]
    UnknownSymbol(String),
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),

    #[error("object id {0} does not occur in the mask")]
    ObjectNotFound(u32),
    #[error("image has no pixels")]
    EmptyImage,
    #[error("image and mask dimensions differ: {0}x{1} vs {2}x{3}")]
    RasterMismatch(usize, usize, usize, usize),
    #[error("malformed PNM data: {0}")]
    Pnm(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("unknown environment: {0}")]
    UnknownEnvironment(String),
    #[error("unknown object: {0}")]
    UnknownObject(String),

    #[error("selected set is empty")]
    EmptySelection,
    #[error("non-selected mass {0} leaves nothing for the selected objects")]
    MassOverflow(f64),
    #[error("loss or gradient became non-finite at iteration {0}")]
    NonFiniteLoss(usize),
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),

    #[error("{file}:{line}: {field}: {message}")]
    Schema {
        file: String,
        line: usize,
        field: String,
        message: String,
    },
    #[error("{file}:{line}: task references unknown environment {env_id}")]
    DanglingEnvRef {
        file: String,
        line: usize,
        env_id: String,
    },
    #[error("{file}:{line}: duplicate id {id}")]
    DuplicateId { file: String, line: usize, id: String },
    #[error("need at least two groups to split, found {0}")]
    TooFewGroups(usize),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: String,
        #[source]
        source: Box<Error>,
    },

    #[error("could not place blocks after {0} attempts")]
    PlacementFailure(usize),
    #[error("invalid category {0}, expected 1..=5")]
    InvalidCategory(u8),

    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by bad user input rather than by a failed computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::NonFiniteLoss(_) | Error::PlacementFailure(_) | Error::Io { .. } => false,
            Error::Fold { source, .. } => source.is_validation(),
            _ => true,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
