use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown profile '{0}' (expected one of gfast106, gfast212, vdsl17)")]
    UnknownProfile(String),

    #[error("unknown method '{0}'")]
    UnknownMethod(String),

    /// Channel matrix is singular or numerically rank deficient.
    #[error("singular channel (condition estimate {condition:.3e})")]
    SingularChannel { condition: f64 },

    #[error("zero diagonal entry at index {index}")]
    SingularDiagonal { index: usize },

    #[error("degenerate channel: zero diagonal gain in triangular factor")]
    DegenerateChannel,

    #[error("config line {line}: {msg}")]
    ConfigSyntax { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
