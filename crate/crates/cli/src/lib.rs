//! Library side of the `plaposc` command line tool: scenario parsing,
//! experiment drivers, deterministic CSV output, and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod output;
pub mod scenario;

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Invalid scenario, parameters, or hypothesis violation (exit 2).
    Validation(String),
    /// Numerical failure during a run (exit 3).
    Numeric(String),
    /// One or more acceptance criteria failed (exit 4).
    Acceptance(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Acceptance(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numeric(m) | Failure::Acceptance(m) => m,
        }
    }
}

impl From<plaposc::Error> for Failure {
    fn from(e: plaposc::Error) -> Self {
        match e {
            plaposc::Error::Domain(_)
            | plaposc::Error::Parameter(_)
            | plaposc::Error::Hypothesis(_) => Failure::Validation(e.to_string()),
            plaposc::Error::Integration { .. }
            | plaposc::Error::Inversion(_)
            | plaposc::Error::Quadrature(_)
            | plaposc::Error::Analysis(_) => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numeric(format!("{e:#}"))
    }
}
