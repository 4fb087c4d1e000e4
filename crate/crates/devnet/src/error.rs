use std::path::PathBuf;

/// Crate-wide error type.
///
/// Variants are grouped by how a front end should treat them: configuration
/// and data problems are caused by user input, `Internal` indicates a bug.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// An actor matched two different alias-file groups.
    #[error("alias file conflict: actor {actor} matches groups '{first}' and '{second}'")]
    AliasConflict {
        actor: String,
        first: String,
        second: String,
    },

    /// Malformed records exceeded the corrupt-dump threshold.
    #[error("corrupt dump {path}: {malformed} of {total} lines malformed (more than {limit_pct}% allowed)")]
    CorruptDump {
        path: String,
        malformed: usize,
        total: usize,
        limit_pct: u32,
    },

    /// Multi-repo project with a commit repo that matches no subsystem.
    #[error("repository '{repo}' matches no configured subsystem")]
    UnknownRepo { repo: String },

    /// An involvement actor that the identity pass never saw.
    #[error("unresolved actor '{actor}': identity resolution is incomplete")]
    UnresolvedActor { actor: String },

    #[error("developer d{dev} is not a node of the window {window} graph")]
    MemberNotInGraph { dev: u32, window: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("synthesis spec infeasible: {0}")]
    InfeasibleSpec(String),

    #[error("pipeline stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    FileIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io_at(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::FileIo {
            path: path.into(),
            source,
        }
    }

    /// Stage errors inherit the classification of their cause.
    pub fn is_internal(&self) -> bool {
        match self {
            Error::Internal(_) => true,
            Error::Stage { source, .. } => source.is_internal(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
