//! Scenario and report documents, the commands behind the `txagg` binary and
//! the benchmark harness.

mod bench;
mod commands;
mod report;
mod scenario;

use std::io::Read;
use std::path::Path;

use thiserror::Error;

pub use bench::{bench_instance, cmd_bench, rows_to_csv, BenchOptions, BenchRow, MAX_BENCH_HUBS};
pub use commands::{cmd_reduce_subset_sum, cmd_simulate, cmd_solve, cmd_verify, SolveFlags};
pub use report::{Baseline, ExecutionReport, ReportFile, SolverStatsReport};
pub use scenario::{
    parse_seed, ClientEntry, ConfigEntry, HubEntry, Scenario, ScenarioFile, TxnEntry,
};

use crate::protocol::ProtocolError;
use crate::solver::SolverError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_FAILED: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Verification(_) => EXIT_VERIFY_FAILED,
            CliError::Failed(_) => EXIT_FAILED,
        }
    }

    pub(crate) fn failed(e: impl std::fmt::Display) -> Self {
        CliError::Failed(e.to_string())
    }

    pub(crate) fn from_solver(e: SolverError) -> Self {
        match e {
            SolverError::InvalidInput(_) | SolverError::Pcn(_) => CliError::Invalid(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Solver(s) => CliError::from_solver(s),
            ProtocolError::Exec(_)
            | ProtocolError::MissingShare { .. }
            | ProtocolError::LengthMismatch
            | ProtocolError::Decode(_) => CliError::Failed(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

/// Read a file, or standard input for `-`.
pub fn read_input(path: &Path) -> Result<String, CliError> {
    let mut text = String::new();
    if path == Path::new("-") {
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::Invalid(format!("stdin: {e}")))?;
    } else {
        text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    }
    Ok(text)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    ScenarioFile::parse(&read_input(path)?)?.resolve()
}
