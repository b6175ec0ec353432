use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown symbol at word {word}, phoneme {phoneme}: {symbol:?}")]
    UnknownSymbol {
        word: usize,
        phoneme: usize,
        symbol: String,
    },

    #[error("overlapping or non-contiguous word ranges at word {word}")]
    WordRanges { word: usize },

    #[error("emphasis index {index} out of range for {n_words} words")]
    EmphasisOutOfRange { index: usize, n_words: usize },

    #[error("invalid utterance at word {word}: {reason}")]
    InvalidWord { word: usize, reason: String },

    #[error("invalid utterance: {0}")]
    InvalidUtterance(String),

    #[error("length mismatch in {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{name} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("word index {index} out of range for {n_words} words")]
    WordIndex { index: usize, n_words: usize },

    #[error("frame range {start}..{end} is not within 0..{len}")]
    FrameRange { start: usize, end: usize, len: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("malformed {format}: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
