//! Problem data and solver configuration.

use std::sync::{Arc, OnceLock};

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{FlrError, Result};
use crate::graph::PenaltyGraph;

/// Design matrix. `Identity` is the signal-approximator shortcut: `X beta = beta`
/// and `X^T X = I` are used symbolically, nothing is materialized.
#[derive(Debug, Clone)]
pub enum Design {
    Dense(Array2<f64>),
    Identity,
}

#[derive(Debug)]
struct Data {
    y: Array1<f64>,
    design: Design,
    graph: PenaltyGraph,
    xty: Array1<f64>,
    gram: OnceLock<Array2<f64>>,
}

/// A fused lasso regression instance:
/// `1/2 ||y - X beta||^2 + lambda1 ||beta||_1 + lambda2 sum_E |beta_j - beta_k|`.
///
/// The data (`y`, `X`, graph and the cached `X^T X`) is shared, so
/// [`Problem::with_lambdas`] is cheap.
#[derive(Debug, Clone)]
pub struct Problem {
    data: Arc<Data>,
    lambda1: f64,
    lambda2: f64,
}

fn check_lambda(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(FlrError::InvalidParameter(format!(
            "{name} must be finite and non-negative, got {v}"
        )));
    }
    Ok(())
}

impl Problem {
    pub fn new(y: Array1<f64>, x: Array2<f64>, graph: PenaltyGraph, lambda1: f64, lambda2: f64) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(FlrError::DimensionMismatch {
                what: "rows of X vs length of y",
                expected: y.len(),
                got: x.nrows(),
            });
        }
        if x.ncols() != graph.p() {
            return Err(FlrError::DimensionMismatch {
                what: "columns of X vs graph size",
                expected: graph.p(),
                got: x.ncols(),
            });
        }
        let xty = x.t().dot(&y);
        Self::build(y, Design::Dense(x), graph, xty, lambda1, lambda2)
    }

    /// Signal approximator: `X = I`, so `n = p`.
    pub fn identity(y: Array1<f64>, graph: PenaltyGraph, lambda1: f64, lambda2: f64) -> Result<Self> {
        if y.len() != graph.p() {
            return Err(FlrError::DimensionMismatch {
                what: "length of y vs graph size",
                expected: graph.p(),
                got: y.len(),
            });
        }
        let xty = y.clone();
        Self::build(y, Design::Identity, graph, xty, lambda1, lambda2)
    }

    fn build(
        y: Array1<f64>,
        design: Design,
        graph: PenaltyGraph,
        xty: Array1<f64>,
        lambda1: f64,
        lambda2: f64,
    ) -> Result<Self> {
        check_lambda("lambda1", lambda1)?;
        check_lambda("lambda2", lambda2)?;
        Ok(Self {
            data: Arc::new(Data {
                y,
                design,
                graph,
                xty,
                gram: OnceLock::new(),
            }),
            lambda1,
            lambda2,
        })
    }

    /// Same data, different regularization pair.
    pub fn with_lambdas(&self, lambda1: f64, lambda2: f64) -> Result<Self> {
        check_lambda("lambda1", lambda1)?;
        check_lambda("lambda2", lambda2)?;
        Ok(Self {
            data: Arc::clone(&self.data),
            lambda1,
            lambda2,
        })
    }

    pub fn n(&self) -> usize {
        self.data.y.len()
    }

    pub fn p(&self) -> usize {
        self.data.graph.p()
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.data.y
    }

    pub fn design(&self) -> &Design {
        &self.data.design
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.data.design, Design::Identity)
    }

    pub fn graph(&self) -> &PenaltyGraph {
        &self.data.graph
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// `X^T y`
    pub fn xty(&self) -> &Array1<f64> {
        &self.data.xty
    }

    pub(crate) fn check_len(&self, what: &'static str, v: ArrayView1<f64>) -> Result<()> {
        if v.len() != self.p() {
            return Err(FlrError::DimensionMismatch {
                what,
                expected: self.p(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `X v`
    pub fn x_dot(&self, v: ArrayView1<f64>) -> Array1<f64> {
        match &self.data.design {
            Design::Dense(x) => x.dot(&v),
            Design::Identity => v.to_owned(),
        }
    }

    /// `X^T r`
    pub fn xt_dot(&self, r: ArrayView1<f64>) -> Array1<f64> {
        match &self.data.design {
            Design::Dense(x) => x.t().dot(&r),
            Design::Identity => r.to_owned(),
        }
    }

    /// `y - X beta`
    pub fn residual(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        &self.data.y - &self.x_dot(beta)
    }

    /// `X^T X`, computed on first use and cached. `None` for the identity design.
    pub fn gram(&self) -> Option<&Array2<f64>> {
        match &self.data.design {
            Design::Dense(x) => Some(self.data.gram.get_or_init(|| x.t().dot(x))),
            Design::Identity => None,
        }
    }

    /// `X^T X v`, either through the cached Gram matrix or as two
    /// matrix-vector products.
    pub fn gram_apply(&self, v: ArrayView1<f64>, use_gram: bool) -> Array1<f64> {
        match &self.data.design {
            Design::Identity => v.to_owned(),
            Design::Dense(x) => {
                if use_gram {
                    self.gram().expect("dense design").dot(&v)
                } else {
                    x.t().dot(&x.dot(&v))
                }
            }
        }
    }

    /// `X_j^T X_j` for every column.
    pub fn column_sq_norms(&self) -> Array1<f64> {
        match &self.data.design {
            Design::Dense(x) => x.columns().into_iter().map(|c| c.dot(&c)).collect(),
            Design::Identity => Array1::ones(self.p()),
        }
    }
}

/// How `X^T X v` is applied inside iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GramPolicy {
    /// Cached `X^T X` when `n >= p`, matrix-free otherwise.
    #[default]
    Auto,
    Cached,
    MatrixFree,
}

impl GramPolicy {
    pub fn use_gram(self, problem: &Problem) -> bool {
        match self {
            GramPolicy::Auto => problem.n() >= problem.p(),
            GramPolicy::Cached => true,
            GramPolicy::MatrixFree => false,
        }
    }
}

/// Tuning shared by all solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Perturbation of the absolute values in the MM weights.
    pub epsilon: f64,
    /// Tolerance on the relative change of the objective.
    pub delta: f64,
    pub max_outer_iters: usize,
    /// Inner conjugate-gradient cap; `None` means `10 p`.
    pub max_pcg_iters: Option<usize>,
    /// Inner relative-residual tolerance; `None` means `delta`.
    pub pcg_tolerance: Option<f64>,
    pub gram: GramPolicy,
    /// Split Bregman augmentation constant; `None` means `||y||_2 / n`.
    pub sb_mu: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            delta: 1e-5,
            max_outer_iters: 10_000,
            max_pcg_iters: None,
            pcg_tolerance: None,
            gram: GramPolicy::Auto,
            sb_mu: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(FlrError::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(FlrError::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.max_outer_iters == 0 || self.max_pcg_iters == Some(0) {
            return Err(FlrError::InvalidParameter("iteration caps must be >= 1".into()));
        }
        if let Some(t) = self.pcg_tolerance {
            if !(t > 0.0) {
                return Err(FlrError::InvalidParameter(format!(
                    "pcg_tolerance must be positive, got {t}"
                )));
            }
        }
        if let Some(mu) = self.sb_mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(FlrError::InvalidParameter(format!("sb_mu must be positive, got {mu}")));
            }
        }
        Ok(())
    }

    pub fn max_pcg_iters_for(&self, p: usize) -> usize {
        self.max_pcg_iters.unwrap_or(10 * p.max(1))
    }

    pub fn pcg_tolerance(&self) -> f64 {
        self.pcg_tolerance.unwrap_or(self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dimension_checks() {
        let g = PenaltyGraph::chain(2).unwrap();
        let x = Array2::<f64>::zeros((3, 2));
        assert!(Problem::new(array![1.0, 2.0], x.clone(), g.clone(), 0.1, 0.1).is_err());
        assert!(Problem::new(
            array![1.0, 2.0, 3.0],
            x.clone(),
            PenaltyGraph::chain(3).unwrap(),
            0.1,
            0.1
        )
        .is_err());
        assert!(Problem::new(array![1.0, 2.0, 3.0], x, g.clone(), -0.1, 0.1).is_err());
        assert!(Problem::identity(array![1.0], g.clone(), 0.0, f64::NAN).is_err());
        assert!(Problem::identity(array![1.0, 2.0], g, 0.0, 0.0).is_ok());
    }

    #[test]
    fn gram_matches_products() {
        let x = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.0]];
        let p = Problem::new(array![1.0, 0.0, 2.0], x, PenaltyGraph::chain(2).unwrap(), 0.0, 0.0).unwrap();
        let v = array![0.3, -0.7];
        let a = p.gram_apply(v.view(), true);
        let b = p.gram_apply(v.view(), false);
        assert!((&a - &b).iter().all(|d| d.abs() < 1e-14));
        assert_eq!(p.xty(), &array![2.0, 2.0]);
        assert_eq!(p.column_sq_norms(), array![10.25, 5.0]);
    }

    #[test]
    fn config_defaults() {
        let c = SolverConfig::default();
        c.validate().unwrap();
        assert_eq!(c.max_pcg_iters_for(200), 2000);
        assert_eq!(c.pcg_tolerance(), 1e-5);
        let bad = SolverConfig {
            epsilon: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
