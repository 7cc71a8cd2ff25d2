use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("cardinality mismatch: {0}")]
    Cardinality(String),

    #[error("node {node} has class id {label}, but the dataset declares {classes} classes")]
    UnknownClass {
        node: usize,
        label: i64,
        classes: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("index {index} appears in more than one split section")]
    SplitOverlap { index: usize },

    #[error("dense oracle limited to {cap} nodes, graph has {n}")]
    OracleCap { n: usize, cap: usize },

    #[error(
        "eigensolver reached {converged}/{requested} pairs after {iterations} Lanczos steps \
         (worst residual {worst_residual:.3e})"
    )]
    EigenNotConverged {
        converged: usize,
        requested: usize,
        iterations: usize,
        worst_residual: f64,
    },

    #[error("non-finite training loss at epoch {epoch}; learning rate {lr} is likely too high")]
    NonFiniteLoss { epoch: usize, lr: f64 },

    #[error("raw features requested but the dataset has none")]
    MissingFeatures,

    #[error("{stage} did not converge within {iterations} iterations (last delta {delta:.3e})")]
    NotConverged {
        stage: &'static str,
        iterations: usize,
        delta: f64,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by bad input or configuration rather than numerics or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NodeOutOfRange { .. }
                | Error::DimensionMismatch { .. }
                | Error::Parse { .. }
                | Error::Cardinality(_)
                | Error::UnknownClass { .. }
                | Error::InvalidConfig(_)
                | Error::Empty(_)
                | Error::SplitOverlap { .. }
                | Error::OracleCap { .. }
                | Error::MissingFeatures
                | Error::Format(_)
        )
    }

    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            Error::EigenNotConverged { .. }
                | Error::NotConverged { .. }
                | Error::NonFiniteLoss { .. }
        )
    }
}
