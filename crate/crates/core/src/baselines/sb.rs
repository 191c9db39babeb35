//! Split Bregman for fused lasso regression.
//!
//! Splits `a = beta`, `b = D beta` and alternates a linear solve for `beta`,
//! soft-thresholding for `a` and `b`, and dual ascent on `u`, `v`. A single
//! constant `mu` serves as both augmentation weights and both dual step sizes.

use std::time::Instant;

use ndarray::{Array1, Array2};

use crate::banded::BandedSpdMatrix;
use crate::error::Result;
use crate::linalg::SpdFactor;
use crate::mm::{banded_identity, FitResult, Termination};
use crate::objective::{objective, relative_error, soft_threshold};
use crate::problem::{Problem, SolverConfig};

/// Primal and dual variables of a Split Bregman run.
#[derive(Debug, Clone)]
pub struct SbState {
    pub beta: Array1<f64>,
    pub a: Array1<f64>,
    pub b: Array1<f64>,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub mu: f64,
}

/// `||y||_2 / n`
pub fn sb_default_mu(problem: &Problem) -> f64 {
    problem.y().dot(problem.y()).sqrt() / problem.n() as f64
}

/// Factors `X^T X + mu I + mu D^T D` once.
fn factor_system(problem: &Problem, mu: f64) -> Result<SpdFactor> {
    let graph = problem.graph();
    let p = problem.p();
    if banded_identity(problem) {
        let mut m = BandedSpdMatrix::zeros(p, graph.bandwidth());
        for i in 0..p {
            m.add_diag(i, 1.0 + mu);
        }
        for &(j, k) in graph.edges() {
            m.add_diag(j, mu);
            m.add_diag(k, mu);
            m.add(k, j, -mu);
        }
        return SpdFactor::banded(&m);
    }
    let mut m = match problem.gram() {
        Some(g) => g.clone(),
        None => Array2::eye(p),
    };
    for i in 0..p {
        m[[i, i]] += mu;
    }
    for &(j, k) in graph.edges() {
        m[[j, j]] += mu;
        m[[k, k]] += mu;
        m[[j, k]] -= mu;
        m[[k, j]] -= mu;
    }
    SpdFactor::dense(&m)
}

pub fn sb_fit(problem: &Problem, config: &SolverConfig) -> Result<FitResult> {
    sb_fit_with_state(problem, config).map(|(fit, _)| fit)
}

/// Split Bregman from `beta = a = b = u = v = 0`, stopping on the relative
/// change of the objective at `beta`.
pub fn sb_fit_with_state(problem: &Problem, config: &SolverConfig) -> Result<(FitResult, SbState)> {
    config.validate()?;
    let start = Instant::now();
    let (p, m) = (problem.p(), problem.graph().m());
    let mu = match config.sb_mu {
        Some(mu) => mu,
        None => {
            let mu = sb_default_mu(problem);
            if mu > 0.0 {
                mu
            } else {
                1.0
            }
        }
    };
    let d = problem.graph().difference_matrix();
    let factor = factor_system(problem, mu)?;
    let (l1, l2) = (problem.lambda1(), problem.lambda2());

    let mut st = SbState {
        beta: Array1::zeros(p),
        a: Array1::zeros(p),
        b: Array1::zeros(m),
        u: Array1::zeros(p),
        v: Array1::zeros(m),
        mu,
    };
    let mut f_old = objective(problem, st.beta.view())?;
    let mut trace = vec![f_old];
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    while iterations < config.max_outer_iters {
        let rhs_b = &st.b * mu - &st.v;
        let rhs = problem.xty() + &(&st.a * mu - &st.u) + &d.apply_transpose(rhs_b.view());
        st.beta = factor.solve(rhs.view());
        let db = d.apply(st.beta.view());
        st.a = Array1::from_shape_fn(p, |j| soft_threshold(st.beta[j] + st.u[j] / mu, l1 / mu));
        st.b = Array1::from_shape_fn(m, |r| soft_threshold(db[r] + st.v[r] / mu, l2 / mu));
        st.u.scaled_add(mu, &(&st.beta - &st.a));
        st.v.scaled_add(mu, &(&db - &st.b));
        iterations += 1;

        let f_new = objective(problem, st.beta.view())?;
        trace.push(f_new);
        let re = relative_error(f_new, f_old);
        f_old = f_new;
        if re <= config.delta {
            termination = Termination::Converged;
            break;
        }
    }

    let fit = FitResult {
        beta: st.beta.clone(),
        objective_trace: trace,
        iterations,
        termination,
        inner_iteration_total: 0,
        inner_residuals: Vec::new(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((fit, st))
}
