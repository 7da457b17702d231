use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("decode error: {0}")]
    Decode(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("segment {segment} lies outside a {width}x{height} image")]
    Bounds {
        segment: String,
        width: u32,
        height: u32,
    },

    #[error("segment {0} is too small to split into quadrants")]
    IndivisibleSegment(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("classification error: {0}")]
    Classify(String),

    #[error("external classifier failed: {0}")]
    ExternalClassifier(String),

    #[error("external classifier protocol error: {0}")]
    Protocol(String),

    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that originate in the classifier backend.
    pub fn is_classifier_failure(&self) -> bool {
        matches!(
            self,
            Error::Classify(_) | Error::ExternalClassifier(_) | Error::Protocol(_)
        )
    }
}
