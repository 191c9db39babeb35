use std::io::Write;

use fusedlasso::{relative_error, FitResult, SolverConfig, SpgConfig, Termination};
use serde::{Deserialize, Serialize};

use crate::Solver;

/// Machine-readable summary of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub solver: Solver,
    /// Input directory or image path.
    pub input: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub config: SolverConfig,
    pub spg: SpgConfig,
    pub iterations: usize,
    pub inner_iterations: usize,
    /// Monotonic wall-clock seconds spent in the solver, file IO excluded.
    pub wall_time_s: f64,
    pub final_objective: f64,
    pub final_relative_error: Option<f64>,
    pub termination: Termination,
    pub trace_path: Option<String>,
}

impl RunRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn from_fit(
        solver: Solver,
        input: String,
        lambda1: f64,
        lambda2: f64,
        config: &SolverConfig,
        spg: &SpgConfig,
        fit: &FitResult,
        trace_path: Option<String>,
    ) -> Self {
        Self {
            solver,
            input,
            lambda1,
            lambda2,
            config: config.clone(),
            spg: *spg,
            iterations: fit.iterations,
            inner_iterations: fit.inner_iteration_total,
            wall_time_s: fit.wall_time,
            final_objective: fit.final_objective(),
            final_relative_error: fit.final_relative_error(),
            termination: fit.termination,
            trace_path,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// `iteration,objective,relative_error`; the first row has no relative error.
pub fn write_trace<W: Write>(mut w: W, trace: &[f64]) -> std::io::Result<()> {
    let mut s = String::from("iteration,objective,relative_error\n");
    for (i, f) in trace.iter().enumerate() {
        if i == 0 {
            s.push_str(&format!("0,{f},\n"));
        } else {
            s.push_str(&format!("{i},{f},{}\n", relative_error(*f, trace[i - 1])));
        }
    }
    w.write_all(s.as_bytes())
}
