use thiserror::Error;

/// Errors produced by fitting, estimation and experiment code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver did not converge after {iterations} iterations (gradient norm {residual:e})")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("swap {index}: {source}")]
    Swap {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate limit: {0}")]
    DegenerateLimit(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_swap(self, index: usize) -> Self {
        Error::Swap {
            index,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping fold/swap context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Fold { source, .. } | Error::Swap { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical kind (solver, singular systems, quadrature).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::SolverFailure { .. }
                | Error::NumericalFailure(_)
                | Error::DegenerateFit(_)
                | Error::DegenerateLimit(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
