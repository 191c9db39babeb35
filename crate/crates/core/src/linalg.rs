//! Dense Cholesky factor-and-solve and power iteration.

use ndarray::{Array1, Array2, ArrayView1};

use crate::banded::{BandedFactor, BandedSpdMatrix};
use crate::error::{FlrError, Result};

/// Pivots at or below this fraction of the original diagonal entry are
/// treated as numerically singular.
pub(crate) const PIVOT_RTOL: f64 = 4.0 * f64::EPSILON;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower Cholesky factor `L` of a dense SPD matrix, stored row-major.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    /// Factorizes using the lower triangle of `a` only.
    pub fn factor(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(FlrError::DimensionMismatch {
                what: "columns of a square matrix",
                expected: n,
                got: a.ncols(),
            });
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let (head, row_i) = l.split_at_mut(i * n);
                let s = if j < i {
                    let row_j = &head[j * n..j * n + j];
                    a[[i, j]] - dot(&row_i[..j], row_j)
                } else {
                    a[[i, i]] - dot(&row_i[..i], &row_i[..i])
                };
                if j == i {
                    if !(s > PIVOT_RTOL * a[[i, i]].abs()) || !s.is_finite() {
                        return Err(FlrError::NotPositiveDefinite { pivot: i, value: s });
                    }
                    row_i[i] = s.sqrt();
                } else {
                    row_i[j] = s / head[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side length");
        let mut z: Vec<f64> = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            z[i] = (z[i] - dot(row, &z[..i])) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let xi = z[i] / self.l[i * n + i];
            z[i] = xi;
            let row = &self.l[i * n..i * n + i];
            for (zk, lik) in z[..i].iter_mut().zip(row) {
                *zk -= lik * xi;
            }
        }
        Array1::from(z)
    }

    pub fn factor_matrix(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.n, self.n), self.l.clone()).expect("square")
    }
}

/// A factored SPD system, dense or banded.
#[derive(Debug, Clone)]
pub enum SpdFactor {
    Dense(DenseCholesky),
    Banded(BandedFactor),
}

impl SpdFactor {
    pub fn dense(a: &Array2<f64>) -> Result<Self> {
        DenseCholesky::factor(a).map(SpdFactor::Dense)
    }

    pub fn banded(a: &BandedSpdMatrix) -> Result<Self> {
        a.cholesky().map(SpdFactor::Banded)
    }

    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        match self {
            SpdFactor::Dense(f) => f.solve(b),
            SpdFactor::Banded(f) => f.solve(b),
        }
    }
}

/// Outcome of [`power_iteration`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    /// Last Rayleigh quotient, a lower bound on the largest eigenvalue.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
///
/// Stops when the Rayleigh estimate changes by at most `tol` relative, or
/// after `max_iters` steps with `converged = false`.
pub fn power_iteration<F>(apply: F, dim: usize, tol: f64, max_iters: usize) -> PowerEstimate
where
    F: Fn(ArrayView1<f64>) -> Array1<f64>,
{
    let mut out = PowerEstimate {
        value: 0.0,
        iterations: 0,
        converged: true,
    };
    if dim == 0 {
        return out;
    }
    // deterministic start with no exact symmetry
    let mut v = Array1::from_shape_fn(dim, |i| 1.0 + 0.5 * ((i as f64) * 0.618_034).fract());
    let nv = v.dot(&v).sqrt();
    v /= nv;
    for it in 1..=max_iters {
        let w = apply(v.view());
        let est = v.dot(&w);
        let nw = w.dot(&w).sqrt();
        out.iterations = it;
        if nw == 0.0 {
            out.value = 0.0;
            return out;
        }
        v = w / nw;
        let done = (est - out.value).abs() <= tol * est.abs();
        out.value = est;
        if done {
            return out;
        }
    }
    out.converged = false;
    out
}
