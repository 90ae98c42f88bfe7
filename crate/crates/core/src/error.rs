use std::path::PathBuf;

/// Errors produced by the library.
///
/// Each variant maps onto a stable [`Error::class`] string that the CLI prints
/// so failures are machine-parsable.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),

    #[error("duplicate label code {0:?}")]
    DuplicateCode(String),

    #[error("document {doc_id:?} references unknown label code {code:?}")]
    UnknownCode { doc_id: String, code: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("scorer failed on batch {batch}: {message}")]
    Scorer { batch: usize, message: String },

    #[error("explainer iteration {iteration}: {source}")]
    Explain {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sentence {sentence} of {doc_id:?} was never observed {state} after guard top-ups")]
    DegenerateTally {
        doc_id: String,
        sentence: usize,
        state: &'static str,
    },

    #[error("document {doc_id:?} has {sentences} sentences; exhaustive explanation supports at most {max}")]
    DocumentTooLarge {
        doc_id: String,
        sentences: usize,
        max: usize,
    },

    #[error("embedder failed on batch {batch}: {message}")]
    Embedder { batch: usize, message: String },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("no importance matrix for document {0:?}")]
    MissingImportance(String),

    #[error("unknown document {0:?}")]
    UnknownDocument(String),

    #[error("answer for {doc_id:?} at [{start}, {end}) no longer matches the document text")]
    CorpusDrift {
        doc_id: String,
        start: usize,
        end: usize,
    },

    #[error("insufficient synthetic pairs: need {needed}, have {available}")]
    InsufficientPairs { needed: usize, available: usize },

    #[error("{0}")]
    Undefined(String),

    #[error("query prompt needs {needed} units but the budget is {budget}")]
    QueryExceedsBudget { needed: usize, budget: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short, stable error class used in CLI diagnostics.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MalformedRecord { .. } | Error::Json(_) => "parse",
            Error::DuplicateDocId(_)
            | Error::DuplicateCode(_)
            | Error::UnknownCode { .. }
            | Error::EmptyCorpus
            | Error::UnknownDocument(_)
            | Error::MissingImportance(_)
            | Error::CorpusDrift { .. }
            | Error::InvalidInput(_)
            | Error::InsufficientPairs { .. } => "data",
            Error::InvalidConfig(_) => "config",
            Error::NonFiniteLoss { .. } => "training",
            Error::Scorer { .. } | Error::Explain { .. } => "scorer",
            Error::Embedder { .. } | Error::DimensionMismatch(..) => "embedder",
            Error::DegenerateTally { .. } | Error::DocumentTooLarge { .. } => "explainer",
            Error::Undefined(_) => "undefined",
            Error::QueryExceedsBudget { .. } => "budget",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
