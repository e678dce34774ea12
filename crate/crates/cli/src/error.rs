use std::fmt;

use massid_core::dynamics::SimError;
use massid_core::identify::IdentifyError;
use massid_core::adjoint::AdjointError;
use massid_policy::PolicyError;

pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;
pub const EXIT_IDENTIFY: u8 = 4;

/// An error carrying the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub err: anyhow::Error,
}

impl CliError {
    pub fn new(code: u8, err: impl Into<anyhow::Error>) -> Self {
        Self { code, err: err.into() }
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        Self::new(EXIT_INPUT, anyhow::anyhow!("{msg}"))
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            code: self.code,
            err: self.err.context(ctx),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.err)
    }
}

fn sim_code(e: &SimError) -> u8 {
    match e {
        SimError::Diverged { .. } => EXIT_DIVERGED,
        _ => EXIT_INPUT,
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        Self::new(sim_code(&e), e)
    }
}

impl From<AdjointError> for CliError {
    fn from(e: AdjointError) -> Self {
        let code = match &e {
            AdjointError::Sim(s) => sim_code(s),
            AdjointError::Unobservable | AdjointError::NonPhysical { .. } => EXIT_IDENTIFY,
            _ => EXIT_INPUT,
        };
        Self::new(code, e)
    }
}

impl From<IdentifyError> for CliError {
    fn from(e: IdentifyError) -> Self {
        let code = match &e {
            IdentifyError::Sim(s) => sim_code(s),
            IdentifyError::Adjoint(a) => CliError::from(a.clone()).code,
            _ => EXIT_INPUT,
        };
        Self::new(code, e)
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        Self::new(EXIT_INPUT, e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(EXIT_INPUT, e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::new(EXIT_INPUT, e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(EXIT_INPUT, e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
