use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("missing modality: {0}")]
    MissingModality(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model not initialized: {0}")]
    Uninitialized(String),
    #[error(
        "non-finite loss at step {step} in {component} (max |activation| = {max_abs_activation})"
    )]
    NonFinite {
        step: u64,
        component: String,
        max_abs_activation: f32,
    },
}

impl Error {
    /// Short machine-readable category, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Shape(_) => "shape",
            Error::UndefinedMetric(_) => "undefined-metric",
            Error::MissingModality(_) => "missing-modality",
            Error::Config(_) => "config",
            Error::Uninitialized(_) => "uninitialized",
            Error::NonFinite { .. } => "non-finite",
        }
    }
}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
