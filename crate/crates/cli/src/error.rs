use crowdsweep::bilevel::BilevelError;
use crowdsweep::dynamics::DynamicsError;
use crowdsweep::nco::NcoError;
use serde_json::json;
use thiserror::Error;

/// Failure of a command, carrying its exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Internal(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_UNVERIFIED: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_USAGE,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Parse(_) => "parse",
            CliError::Io(_) => "io",
            CliError::Infeasible(_) => "infeasible",
            CliError::Internal(_) => "internal",
        }
    }

    /// One-line JSON document for the diagnostic stream.
    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() } }).to_string()
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        let msg = e.to_string();
        match e {
            DynamicsError::InvalidScenario { .. } => CliError::Parse(msg),
            DynamicsError::InfeasibleControl { .. }
            | DynamicsError::InfeasiblePoint { .. }
            | DynamicsError::TruncationViolation { .. } => CliError::Infeasible(msg),
            DynamicsError::Dimension(_) | DynamicsError::Grid(_) => CliError::Usage(msg),
            DynamicsError::Stability(_) | DynamicsError::EmptySamples => CliError::Internal(msg),
        }
    }
}

impl From<BilevelError> for CliError {
    fn from(e: BilevelError) -> Self {
        let msg = e.to_string();
        match e {
            BilevelError::Dynamics(d) => d.into(),
            BilevelError::Infeasible { .. } | BilevelError::NoFeasibleStart => CliError::Infeasible(msg),
            BilevelError::UnsupportedFamily(_)
            | BilevelError::InvalidOptions(_)
            | BilevelError::Dimension(_)
            | BilevelError::Participant(_) => CliError::Usage(msg),
        }
    }
}

impl From<NcoError> for CliError {
    fn from(e: NcoError) -> Self {
        let msg = e.to_string();
        match e {
            NcoError::Dynamics(d) => d.into(),
            NcoError::Bilevel(b) => b.into(),
            NcoError::Precondition { .. } => CliError::Infeasible(msg),
            NcoError::Dimension(_) | NcoError::Participant(_) => CliError::Usage(msg),
            NcoError::Geometry(_) | NcoError::IndeterminateWitness { .. } => CliError::Internal(msg),
        }
    }
}
