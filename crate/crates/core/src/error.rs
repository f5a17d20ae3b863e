use auginf_numerics::NumericsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AugInfError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sample {sample_id}: {}", violations.join("; "))]
    Validation { sample_id: u64, violations: Vec<String> },
    #[error("numerical divergence: {0}")]
    Divergence(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AugInfError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            AugInfError::Config(_) => 2,
            AugInfError::Numerics(NumericsError::Config(_)) => 2,
            AugInfError::Numerics(NumericsError::Shape { .. }) => 2,
            AugInfError::Divergence(_) => 4,
            AugInfError::Numerics(NumericsError::NonFinite(_)) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, AugInfError>;

pub(crate) fn config(msg: impl Into<String>) -> AugInfError {
    AugInfError::Config(msg.into())
}
