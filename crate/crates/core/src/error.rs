use thiserror::Error;

/// Errors raised by the optimizers, oracles, protocol simulator and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    /// A stochastic sign was requested for a vector outside the `[-R, R]` box.
    #[error("domain violation: ||v||_inf = {norm} exceeds R = {radius}")]
    Domain { norm: f64, radius: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("index {index} out of range for {len} components")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("diverged at t = {t}: {detail}")]
    Diverged { t: usize, detail: String },

    #[error("protocol error in round {round} (node {node:?}): {detail}")]
    Protocol {
        round: u64,
        node: Option<u32>,
        detail: String,
    },

    #[error("wire decode error: {0}")]
    Wire(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
