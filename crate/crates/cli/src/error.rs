use std::fmt;

/// Failure classes of the runner, each with its own exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Malformed config or CSV.
    Parse(String),
    /// The data violate a modelling assumption or a documented precondition.
    Validation(String),
    /// A solver or the output stage failed.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Run(_) => 4,
        }
    }

    /// Classifies a library error raised while checking inputs.
    pub fn validation(err: sigmahom::Error) -> Self {
        CliError::Validation(err.to_string())
    }

    /// Classifies a library error raised while computing.
    pub fn run(err: sigmahom::Error) -> Self {
        match err {
            sigmahom::Error::Assumption { .. } => CliError::Validation(err.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Run(m) => write!(f, "run error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
