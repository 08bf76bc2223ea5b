use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("robot index {index} out of range for {count} robots")]
    RobotIndex { index: usize, count: usize },

    #[error("infeasible power vector: {0}")]
    InfeasiblePower(String),

    #[error("pilot phase infeasible: overhead {overhead_s} s does not fit in time budget {budget_s} s")]
    InfeasiblePilot { overhead_s: f64, budget_s: f64 },

    #[error("robot {robot}: {source}")]
    Robot {
        robot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Remote(#[from] RemoteError),

    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn for_robot(self, robot: usize) -> Self {
        Error::Robot { robot, source: Box::new(self) }
    }

    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::RobotIndex { .. } => "robot_index",
            Error::InfeasiblePower(_) => "infeasible_power",
            Error::InfeasiblePilot { .. } => "infeasible_pilot",
            Error::Robot { source, .. } => source.kind(),
            Error::Remote(_) => "remote",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

/// Failures talking to a remote chat-completion endpoint.
#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("endpoint returned HTTP {status}")]
    Status { status: u16 },

    #[error("could not parse model output: {0}")]
    Parse(String),

    #[error("missing credential: environment variable `{0}` is not set")]
    MissingCredential(String),
}

impl RemoteError {
    pub fn is_retryable(&self) -> bool {
        match self {
            RemoteError::Transport { .. } => true,
            RemoteError::Status { status } => *status == 429 || *status >= 500,
            RemoteError::Parse(_) | RemoteError::MissingCredential(_) => false,
        }
    }
}
