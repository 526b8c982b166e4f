use thiserror::Error;

/// Errors produced by any stage of the sparsification toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("state blew up at step {step} (max |state| = {magnitude:.3e})")]
    BlowUp { step: usize, magnitude: f64 },

    #[error("rank deficient: requested {requested} modes but attainable rank is {attainable}")]
    RankDeficient { requested: usize, attainable: usize },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Tag an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &str) -> Error {
        match self {
            Error::Io(e) => Error::Numerical(format!("[{stage}] io error: {e}")),
            other => match other {
                Error::Infeasible(msg) => Error::Infeasible(format!("[{stage}] {msg}")),
                Error::Config(msg) => Error::Config(format!("[{stage}] {msg}")),
                e => Error::Numerical(format!("[{stage}] {e}")),
            },
        }
    }
}
