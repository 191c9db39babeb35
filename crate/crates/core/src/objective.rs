//! The objective, its perturbed version and the quadratic majorizer.

use ndarray::ArrayView1;

use crate::error::{FlrError, Result};
use crate::problem::Problem;

/// `sign(x) * max(|x| - lam, 0)`
pub fn soft_threshold(x: f64, lam: f64) -> f64 {
    if x > lam {
        x - lam
    } else if x < -lam {
        x + lam
    } else {
        0.0
    }
}

/// `|new - old| / |old|`, or `|new|` when `old == 0`.
pub fn relative_error(f_new: f64, f_old: f64) -> f64 {
    if f_old == 0.0 {
        f_new.abs()
    } else {
        (f_new - f_old).abs() / f_old.abs()
    }
}

/// `|t| - eps * log(1 + |t| / eps)`
#[inline]
pub fn perturbed_abs(t: f64, eps: f64) -> f64 {
    let a = t.abs();
    a - eps * (a / eps).ln_1p()
}

fn half_rss(problem: &Problem, beta: ArrayView1<f64>) -> f64 {
    let r = problem.residual(beta);
    0.5 * r.dot(&r)
}

/// `1/2 ||y - X beta||^2 + lambda1 ||beta||_1 + lambda2 sum_E |beta_j - beta_k|`
pub fn objective(problem: &Problem, beta: ArrayView1<f64>) -> Result<f64> {
    problem.check_len("beta", beta)?;
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let fusion = problem.graph().fusion_norm(beta);
    Ok(half_rss(problem, beta) + problem.lambda1() * l1 + problem.lambda2() * fusion)
}

fn check_eps(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(FlrError::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

/// The objective with every `|t|` in both penalties replaced by
/// [`perturbed_abs`]. Never exceeds [`objective`].
pub fn perturbed_objective(problem: &Problem, beta: ArrayView1<f64>, epsilon: f64) -> Result<f64> {
    problem.check_len("beta", beta)?;
    check_eps(epsilon)?;
    let l1: f64 = beta.iter().map(|&b| perturbed_abs(b, epsilon)).sum();
    let fusion: f64 = problem
        .graph()
        .edges()
        .iter()
        .map(|&(j, k)| perturbed_abs(beta[j] - beta[k], epsilon))
        .sum();
    Ok(half_rss(problem, beta) + problem.lambda1() * l1 + problem.lambda2() * fusion)
}

/// Quadratic surrogate of [`perturbed_objective`] anchored at `anchor`:
/// each perturbed term `phi(t)` is replaced by
/// `phi(t0) + (t^2 - t0^2) / (2 (|t0| + eps))`.
/// It touches the perturbed objective at `beta == anchor` and lies above it
/// everywhere else.
pub fn majorizer(problem: &Problem, beta: ArrayView1<f64>, anchor: ArrayView1<f64>, epsilon: f64) -> Result<f64> {
    problem.check_len("beta", beta)?;
    problem.check_len("anchor", anchor)?;
    check_eps(epsilon)?;
    let term = |t: f64, t0: f64| perturbed_abs(t0, epsilon) + (t * t - t0 * t0) / (2.0 * (t0.abs() + epsilon));
    let l1: f64 = beta.iter().zip(anchor.iter()).map(|(&b, &a)| term(b, a)).sum();
    let fusion: f64 = problem
        .graph()
        .edges()
        .iter()
        .map(|&(j, k)| term(beta[j] - beta[k], anchor[j] - anchor[k]))
        .sum();
    Ok(half_rss(problem, beta) + problem.lambda1() * l1 + problem.lambda2() * fusion)
}
