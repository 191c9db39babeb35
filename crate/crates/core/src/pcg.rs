//! Preconditioned conjugate gradient and the PCG-accelerated MM solver.
//!
//! For chain and lattice graphs the penalty part `lambda1 A + lambda2 B` of
//! the MM system is banded (bandwidth 1 and `q`), so it factors in
//! `O(p w^2)` and serves as the preconditioner for the full system
//! `(X^T X + lambda1 A + lambda2 B) beta = X^T y`.

use ndarray::{Array1, ArrayView1};

use crate::banded::{BandedFactor, BandedSpdMatrix};
use crate::error::{FlrError, Result};
use crate::mm::{build_weights, mm_outer_loop, FitResult};
use crate::problem::{Problem, SolverConfig};

/// Final state of a PCG solve.
#[derive(Debug, Clone)]
pub struct PcgState {
    pub x: Array1<f64>,
    pub r: Array1<f64>,
    pub z: Array1<f64>,
    pub p_dir: Array1<f64>,
    pub iterations: usize,
    /// `||r|| / ||c||` at exit (plain `||r||` when `c = 0`).
    pub relative_residual: f64,
    pub converged: bool,
    /// Relative residual after every iteration, starting with the initial one.
    pub residual_history: Vec<f64>,
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Solves `Q x = c` for SPD `Q` given as an operator.
///
/// `x0` warm-starts the iteration (zero when `None`). Stops once
/// `||c - Q x|| / ||c|| <= tol`, checked against the recomputed residual so
/// drift of the recursive residual cannot end the solve early. Hitting
/// `max_iters` is reported through `converged = false`, not as an error.
pub fn pcg_solve<Q>(
    apply_q: Q,
    precond: &BandedFactor,
    c: ArrayView1<f64>,
    x0: Option<ArrayView1<f64>>,
    tol: f64,
    max_iters: usize,
) -> Result<PcgState>
where
    Q: Fn(ArrayView1<f64>) -> Array1<f64>,
{
    pcg_solve_observed(apply_q, precond, c, x0, tol, max_iters, |_, _| {})
}

/// [`pcg_solve`] with a callback receiving `(j, x_j)` after every iteration.
pub fn pcg_solve_observed<Q, O>(
    apply_q: Q,
    precond: &BandedFactor,
    c: ArrayView1<f64>,
    x0: Option<ArrayView1<f64>>,
    tol: f64,
    max_iters: usize,
    mut observe: O,
) -> Result<PcgState>
where
    Q: Fn(ArrayView1<f64>) -> Array1<f64>,
    O: FnMut(usize, ArrayView1<f64>),
{
    let n = c.len();
    if precond.order() != n {
        return Err(FlrError::DimensionMismatch {
            what: "preconditioner order",
            expected: n,
            got: precond.order(),
        });
    }
    let c_norm = c.dot(&c).sqrt();
    let scale = if c_norm > 0.0 { c_norm } else { 1.0 };
    let mut x = match x0 {
        Some(v) => v.to_owned(),
        None => Array1::zeros(n),
    };
    let mut r = &c - &apply_q(x.view());
    let mut z = precond.solve(r.view());
    let mut p_dir = z.clone();
    let mut rz = r.dot(&z);
    let mut rel = norm(&r) / scale;
    let mut history = vec![rel];
    let mut iterations = 0;

    while rel > tol && iterations < max_iters {
        let qp = apply_q(p_dir.view());
        let pqp = p_dir.dot(&qp);
        if !(pqp > 0.0) {
            return Err(FlrError::PcgBreakdown {
                iteration: iterations + 1,
            });
        }
        let nu = rz / pqp;
        x.scaled_add(nu, &p_dir);
        r.scaled_add(-nu, &qp);
        iterations += 1;
        observe(iterations, x.view());
        rel = norm(&r) / scale;
        if rel <= tol {
            // confirm against the true residual; restart the recursion if it drifted
            r = &c - &apply_q(x.view());
            rel = norm(&r) / scale;
            history.push(rel);
            if rel <= tol {
                break;
            }
            z = precond.solve(r.view());
            p_dir = z.clone();
            rz = r.dot(&z);
            continue;
        }
        history.push(rel);
        z = precond.solve(r.view());
        let rz_new = r.dot(&z);
        let gamma = rz_new / rz;
        rz = rz_new;
        p_dir = &z + &(gamma * &p_dir);
    }

    Ok(PcgState {
        x,
        r,
        z,
        p_dir,
        iterations,
        relative_residual: rel,
        converged: rel <= tol,
        residual_history: history,
    })
}

/// Whether the graph is banded enough for the PCG variant: `w^2 <= p`, which
/// admits chains (`w = 1`) and square lattices (`w = q`, `p = q^2`).
pub fn supports_graph(problem: &Problem) -> bool {
    let w = problem.graph().bandwidth();
    w * w <= problem.p()
}

/// The preconditioner `lambda1 A + lambda2 B` at `beta`. With `lambda1 = 0`
/// that matrix is a graph Laplacian and always singular, so `diag(X^T X)` is
/// added in that case.
pub fn mm_preconditioner(problem: &Problem, beta: ArrayView1<f64>, epsilon: f64) -> BandedSpdMatrix {
    let weights = build_weights(beta, problem.graph(), epsilon);
    let mut m = weights.penalty_matrix(problem.lambda1(), problem.lambda2());
    if problem.lambda1() == 0.0 {
        let d = problem.column_sq_norms();
        for (i, v) in d.iter().enumerate() {
            m.add_diag(i, *v);
        }
    }
    m
}

/// MM where every step solves the reweighted system by PCG, warm-started at
/// the current estimate and preconditioned by the banded penalty matrix.
pub fn mm_fit_pcg(problem: &Problem, config: &SolverConfig) -> Result<FitResult> {
    config.validate()?;
    if !supports_graph(problem) {
        return Err(FlrError::UnsupportedGraph(format!(
            "bandwidth {} is too large for p = {}; the PCG solver needs a chain or lattice graph",
            problem.graph().bandwidth(),
            problem.p()
        )));
    }
    let use_gram = config.gram.use_gram(problem);
    let tol = config.pcg_tolerance();
    let max_inner = config.max_pcg_iters_for(problem.p());
    let (l1, l2) = (problem.lambda1(), problem.lambda2());
    let mut inner_total = 0;
    let mut inner_residuals = Vec::new();

    let mut fit = mm_outer_loop(problem, config, |beta| {
        let weights = build_weights(beta.view(), problem.graph(), config.epsilon);
        let penalty = weights.penalty_matrix(l1, l2);
        let precond = mm_preconditioner(problem, beta.view(), config.epsilon).cholesky()?;
        let apply_q = |v: ArrayView1<f64>| problem.gram_apply(v, use_gram) + penalty.matvec(v);
        let state = pcg_solve(
            apply_q,
            &precond,
            problem.xty().view(),
            Some(beta.view()),
            tol,
            max_inner,
        )?;
        inner_total += state.iterations;
        inner_residuals.push(state.relative_residual);
        if !state.converged {
            return Err(FlrError::PcgNotConverged {
                iterations: state.iterations,
                residual: state.relative_residual,
            });
        }
        Ok(state.x)
    })?;
    fit.inner_iteration_total = inner_total;
    fit.inner_residuals = inner_residuals;
    Ok(fit)
}
