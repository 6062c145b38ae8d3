use serde::Serialize;

use qmetro::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
/// Output could not be written.
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            kind: "validation".into(),
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            kind: "io".into(),
            message: message.into(),
        }
    }

    /// Bad inputs map to exit 2, failures of the computation itself to 3.
    pub fn from_engine(e: Error) -> Self {
        let numerical = matches!(
            e,
            Error::EigenNonConvergence { .. }
                | Error::StepUnderflow { .. }
                | Error::NegativeProbability { .. }
                | Error::ProbabilitySum { .. }
                | Error::AllOutcomesBelowFloor
                | Error::ZeroMatrix
                | Error::Inestimable
                | Error::Unbounded
                | Error::NotIdentifiable { .. }
                | Error::SolverNonConvergence { .. }
                | Error::DegenerateLikelihood
                | Error::ImpossibleOutcome { .. }
        );
        Self {
            code: if numerical { EXIT_NUMERICAL } else { EXIT_VALIDATION },
            kind: if numerical { "numerical" } else { "validation" }.into(),
            message: e.to_string(),
        }
    }

    pub fn is_validation(&self) -> bool {
        self.code == EXIT_VALIDATION
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} error: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}
