use thiserror::Error;

/// Errors produced by the library and surfaced by the command-line tool.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Kernel too large to enumerate. The kernel is carried so callers can
    /// hand it to an external solver.
    #[error("kernel of size {} exceeds enumeration cap {cap}", kernel.len())]
    KernelTooLarge { kernel: Vec<usize>, cap: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
