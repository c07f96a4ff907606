use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("coercivity margin violated: {0}")]
    Coercivity(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("singular tridiagonal system at row {0}")]
    SingularSystem(usize),

    #[error("sample {index} failed: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dense eigen or singular value decomposition failed to converge")]
    Eigen,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("file format: {0}")]
    Format(String),

    #[error("stage `{stage}` failed at N={n}: {source}")]
    Stage {
        stage: &'static str,
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Dimension { .. } => "dimension",
            Error::Coercivity(_) => "coercivity",
            Error::NonFinite(_) => "non_finite",
            Error::SingularSystem(_) => "singular_system",
            Error::Sample { source, .. } => source.kind(),
            Error::Eigen => "eigen",
            Error::Empty(_) => "empty",
            Error::Insufficient(_) => "insufficient",
            Error::Format(_) => "format",
            Error::Stage { source, .. } => source.kind(),
            Error::Io(_) => "io",
        }
    }

    /// Stage name of the innermost stage wrapper, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            got,
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str, n: usize) -> Self {
        Error::Stage {
            stage,
            n,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
