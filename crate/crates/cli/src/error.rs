use std::fmt;

/// Process exit status; one code per outcome category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExitStatus {
    Success,
    /// File system or other I/O failure.
    Io,
    /// The synthesis conditions have no solution.
    Infeasible,
    /// Numerical breakdown of the solver.
    SolverFailure,
    /// Malformed configuration, model, design file or scenario.
    InvalidInput,
    /// Simulation produced non-finite states.
    Diverged,
    /// Certification or a built-in consistency check failed.
    VerificationFailed,
}

impl ExitStatus {
    pub const ALL: [ExitStatus; 7] = [
        ExitStatus::Success,
        ExitStatus::Io,
        ExitStatus::Infeasible,
        ExitStatus::SolverFailure,
        ExitStatus::InvalidInput,
        ExitStatus::Diverged,
        ExitStatus::VerificationFailed,
    ];

    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Io => 1,
            ExitStatus::Infeasible => 2,
            ExitStatus::SolverFailure => 3,
            ExitStatus::InvalidInput => 4,
            ExitStatus::Diverged => 5,
            ExitStatus::VerificationFailed => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    pub fn new(status: ExitStatus, message: impl Into<String>) -> Self {
        CliError { status, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(ExitStatus::Io, message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ExitStatus::InvalidInput, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn codes_are_distinct() {
        let codes: HashSet<i32> = ExitStatus::ALL.iter().map(|s| s.code()).collect();
        assert_eq!(codes.len(), ExitStatus::ALL.len());
    }
}
