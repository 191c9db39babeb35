//! Majorization-minimization for fused lasso regression.
//!
//! Each outer step minimizes the quadratic majorizer of the perturbed
//! objective at the current estimate, which amounts to solving
//!
//! ```text
//! (X^T X + lambda1 A + lambda2 B) beta = X^T y
//! ```
//!
//! with `A = diag(1 / (|beta_j| + eps))` and `B` the graph Laplacian with
//! edge weights `1 / (|beta_j - beta_k| + eps)`. The dense variant factors
//! that matrix from scratch every iteration; see [`crate::pcg`] for the
//! preconditioned conjugate gradient variant.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::banded::BandedSpdMatrix;
use crate::error::{FlrError, Result};
use crate::graph::PenaltyGraph;
use crate::linalg::SpdFactor;
use crate::objective::{objective, relative_error};
use crate::problem::{Problem, SolverConfig};

/// Reweighting matrices of one MM step.
#[derive(Debug, Clone)]
pub struct WeightMatrices {
    /// Diagonal of `A`.
    pub a_diag: Array1<f64>,
    /// Weighted Laplacian `B`, banded with the graph's bandwidth.
    pub b: BandedSpdMatrix,
}

impl WeightMatrices {
    /// `lambda1 A + lambda2 B` as a banded matrix.
    pub fn penalty_matrix(&self, lambda1: f64, lambda2: f64) -> BandedSpdMatrix {
        let p = self.a_diag.len();
        let mut m = BandedSpdMatrix::zeros(p, self.b.bandwidth());
        for i in 0..p {
            for j in i.saturating_sub(self.b.bandwidth())..i {
                let v = self.b.get(i, j);
                if v != 0.0 {
                    m.add(i, j, lambda2 * v);
                }
            }
            m.add_diag(i, lambda1 * self.a_diag[i] + lambda2 * self.b.diag(i));
        }
        m
    }
}

/// Builds `A` and `B` at `beta` in `O(m + p)` work.
pub fn build_weights(beta: ArrayView1<f64>, graph: &PenaltyGraph, epsilon: f64) -> WeightMatrices {
    let a_diag = beta.mapv(|b| 1.0 / (b.abs() + epsilon));
    let mut b = BandedSpdMatrix::zeros(graph.p(), graph.bandwidth());
    for &(j, k) in graph.edges() {
        let w = 1.0 / ((beta[j] - beta[k]).abs() + epsilon);
        b.add_diag(j, w);
        b.add_diag(k, w);
        b.add(k, j, -w);
    }
    WeightMatrices { a_diag, b }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
}

/// Outcome of a solver run.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta: Array1<f64>,
    /// `f(beta^(r))` for `r = 0..=iterations`; entry 0 is the starting point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Total inner conjugate-gradient iterations (0 for direct solvers).
    pub inner_iteration_total: usize,
    /// Relative residual at exit of every inner solve (empty for direct solvers).
    pub inner_residuals: Vec<f64>,
    /// Monotonic wall time in seconds.
    pub wall_time: f64,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the starting value")
    }

    /// Relative change of the objective over the last iteration.
    pub fn final_relative_error(&self) -> Option<f64> {
        let n = self.objective_trace.len();
        (n >= 2).then(|| relative_error(self.objective_trace[n - 1], self.objective_trace[n - 2]))
    }
}

/// Column-wise least-squares slopes `X_j^T y / X_j^T X_j`.
pub fn init_beta(problem: &Problem) -> Result<Array1<f64>> {
    let norms = problem.column_sq_norms();
    if let Some(j) = norms.iter().position(|&v| !(v > 0.0)) {
        return Err(FlrError::DegenerateColumn(j));
    }
    Ok(problem.xty() / &norms)
}

/// One direct MM step: the unique minimizer of the majorizer anchored at
/// `beta`, by Cholesky factor-and-solve. The system is assembled as a full
/// symmetric matrix, except for identity designs on banded graphs where it
/// is exactly banded and factored as such.
pub fn mm_step_dense(problem: &Problem, beta: ArrayView1<f64>, epsilon: f64) -> Result<Array1<f64>> {
    problem.check_len("beta", beta)?;
    if !(epsilon > 0.0) {
        return Err(FlrError::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let weights = build_weights(beta, problem.graph(), epsilon);
    let (l1, l2) = (problem.lambda1(), problem.lambda2());
    let factor = match problem.gram() {
        None if banded_identity(problem) => {
            let mut m = weights.penalty_matrix(l1, l2);
            for i in 0..problem.p() {
                m.add_diag(i, 1.0);
            }
            SpdFactor::banded(&m)?
        }
        gram => {
            let p = problem.p();
            let mut m = match gram {
                Some(g) => g.clone(),
                None => Array2::eye(p),
            };
            for i in 0..p {
                m[[i, i]] += l1 * weights.a_diag[i] + l2 * weights.b.diag(i);
            }
            if l2 != 0.0 {
                for &(j, k) in problem.graph().edges() {
                    let v = l2 * weights.b.get(k, j);
                    m[[k, j]] += v;
                    m[[j, k]] += v;
                }
            }
            SpdFactor::dense(&m)?
        }
    };
    Ok(factor.solve(problem.xty().view()))
}

/// Identity design on a graph with `w^2 <= p`.
pub(crate) fn banded_identity(problem: &Problem) -> bool {
    let w = problem.graph().bandwidth();
    problem.is_identity() && w * w <= problem.p()
}

/// Shared outer loop: starts at [`init_beta`] and applies `step` until the
/// relative change of the (unperturbed) objective is at most `delta`.
pub(crate) fn mm_outer_loop<F>(problem: &Problem, config: &SolverConfig, mut step: F) -> Result<FitResult>
where
    F: FnMut(&Array1<f64>) -> Result<Array1<f64>>,
{
    config.validate()?;
    let start = Instant::now();
    let mut beta = init_beta(problem)?;
    let mut f_old = objective(problem, beta.view())?;
    let mut trace = vec![f_old];
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;
    while iterations < config.max_outer_iters {
        beta = step(&beta)?;
        iterations += 1;
        let f_new = objective(problem, beta.view())?;
        trace.push(f_new);
        let re = relative_error(f_new, f_old);
        f_old = f_new;
        if re <= config.delta {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(FitResult {
        beta,
        objective_trace: trace,
        iterations,
        termination,
        inner_iteration_total: 0,
        inner_residuals: Vec::new(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// MM with a dense Cholesky solve per iteration.
pub fn mm_fit_dense(problem: &Problem, config: &SolverConfig) -> Result<FitResult> {
    mm_outer_loop(problem, config, |beta| {
        mm_step_dense(problem, beta.view(), config.epsilon)
    })
}
