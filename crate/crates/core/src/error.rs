use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("corpus contains no sentences")]
    EmptyCorpus,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "class {symbol} has {count} tags, more than the supported maximum of {max}; \
         drop rare tags from the lexicon entry or raise the limit"
    )]
    TooManyTags {
        symbol: String,
        count: usize,
        max: usize,
    },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("vectors have different lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),

    #[error("tag {tag} is not a member of {class}")]
    TagNotInClass { tag: String, class: String },

    #[error("unknown tag {0}")]
    UnknownTag(String),

    #[error("no reduced class has the tag list [{0}]")]
    NoReducedClass(String),

    #[error("unknown symbol {0}")]
    UnknownSymbol(String),

    #[error("symbol {symbol} at position {position} is not in the input alphabet")]
    UnknownInput { symbol: String, position: usize },

    #[error("no arc from state {state} on input {symbol}")]
    MissingArc { state: u32, symbol: String },

    #[error("transducer runs {found:?}, expected {expected:?}")]
    WrongDirection {
        expected: crate::transducer::Direction,
        found: crate::transducer::Direction,
    },

    #[error("bad header: expected format version {expected}, found {found}")]
    Version { expected: String, found: String },

    #[error("model data is truncated")]
    Truncated,

    #[error("state index {index} out of range (state count {count})")]
    DanglingState { index: u32, count: u32 },

    #[error("symbol index {index} out of range (table size {count})")]
    DanglingSymbol { index: u32, count: u32 },

    #[error("prediction has {predicted} tokens but gold has {gold}")]
    LengthMismatch { predicted: usize, gold: usize },

    #[error("inconsistent model: {0}")]
    Inconsistent(String),

    #[error("{stage}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad input data rather than bad usage.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::InvalidParameter(_) => false,
            Error::Stage { source, .. } => source.is_data_error(),
            _ => true,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
