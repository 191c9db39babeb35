//! Front-end for the `flr` binary: scenario generation, single fits,
//! benchmark suites and image denoising.

pub mod commands;
pub mod record;

use clap::ValueEnum;
use fusedlasso::{mm_fit_dense, mm_fit_pcg, sb_fit, spg_fit, FitResult, FlrError, Problem, SolverConfig, SpgConfig};
use serde::{Deserialize, Serialize};

pub use record::RunRecord;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::NotConverged(_) => 3,
        }
    }
}

impl From<FlrError> for CliError {
    fn from(e: FlrError) -> Self {
        match e {
            FlrError::PcgNotConverged { .. } => CliError::NotConverged(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    MmDense,
    MmPcg,
    Sb,
    Spg,
}

impl Solver {
    pub const ALL: [Solver; 4] = [Solver::MmDense, Solver::MmPcg, Solver::Sb, Solver::Spg];

    pub fn name(self) -> &'static str {
        match self {
            Solver::MmDense => "mm-dense",
            Solver::MmPcg => "mm-pcg",
            Solver::Sb => "sb",
            Solver::Spg => "spg",
        }
    }

    pub fn run(self, problem: &Problem, config: &SolverConfig, spg: &SpgConfig) -> fusedlasso::Result<FitResult> {
        match self {
            Solver::MmDense => mm_fit_dense(problem, config),
            Solver::MmPcg => mm_fit_pcg(problem, config),
            Solver::Sb => sb_fit(problem, config),
            Solver::Spg => spg_fit(problem, config, spg),
        }
    }
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
