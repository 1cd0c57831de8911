//! Error taxonomy shared by all pipeline stages.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor or signal shapes do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A configuration value is out of its legal range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A file or record failed validation while being read.
    #[error("corrupt data: {0}")]
    Corrupt(String),

    /// Statistics collapsed (constant data, zero variance, empty pool).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged: {0}")]
    Divergence(String),

    /// A classification task cannot be posed (e.g. a class is empty).
    #[error("task infeasible: {0}")]
    TaskInfeasible(String),

    /// A cross-validation fold ended up with a single class.
    #[error("stratification error: {0}")]
    Stratification(String),

    /// AUC is undefined because only one class is present.
    #[error("undefined AUC: {0}")]
    UndefinedAuc(String),

    /// The resampler cannot handle this input rate.
    #[error("unsupported sample rate: {0}")]
    UnsupportedRate(String),

    /// A recording is shorter than one analysis window.
    #[error("recording too short: {0}")]
    TooShort(String),

    /// A required upstream artifact is missing on disk.
    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn corrupt(msg: impl Into<String>) -> Self {
        Error::Corrupt(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateData(msg.into())
    }
}
