use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {index:?} quantizes outside the {bits}-bit grid: {detail}")]
    OutOfRange {
        index: Option<usize>,
        bits: u32,
        detail: String,
    },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("denominator is zero: {0}")]
    ZeroDenominator(&'static str),
    #[error("no neighborhood support at query point")]
    NoSupport,
    #[error("all {count} samples lacked neighborhood support")]
    AllUnsupported { count: usize },
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("point set is empty")]
    EmptySet,
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name, used by the CLI for error reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::OutOfRange { .. } => "out_of_range",
            Error::EmptyCloud => "empty_cloud",
            Error::InvalidParams(_) => "invalid_params",
            Error::ZeroDenominator(_) => "zero_denominator",
            Error::NoSupport => "no_support",
            Error::AllUnsupported { .. } => "all_unsupported",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::EmptyMesh => "empty_mesh",
            Error::EmptySet => "empty_set",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::Parse { .. } => "parse_error",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
