//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// One or more parameter or configuration constraints are violated.
    /// Every violation found is listed, not just the first.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    /// A mesh precondition failed (too coarse, bad sizes).
    #[error("mesh error: {0}")]
    Mesh(String),

    /// A field is not admissible (box constraint, boundary data, size mismatch).
    #[error("field error: {0}")]
    Field(String),

    /// A field contains NaN or infinite entries.
    #[error("non-finite value in field '{0}'")]
    NonFinite(&'static str),

    /// An iterative solver hit its iteration cap. The best iterate is left in
    /// place; `residual` is the stopping quantity at exit.
    #[error("{solver} did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        solver: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}
