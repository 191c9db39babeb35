//! Symmetric banded storage and banded Cholesky, `O(p w^2)`.
//!
//! Row `i` keeps the `w + 1` lower-band entries `(i, i-w) ..= (i, i)` in
//! increasing column order; slots left of column 0 are zero padding. With
//! this layout both operands of every inner product in the factorization are
//! contiguous.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{FlrError, Result};
use crate::linalg::{dot, PIVOT_RTOL};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedSpdMatrix {
    p: usize,
    w: usize,
    data: Vec<f64>,
}

impl BandedSpdMatrix {
    pub fn zeros(p: usize, bandwidth: usize) -> Self {
        Self {
            p,
            w: bandwidth,
            data: vec![0.0; p * (bandwidth + 1)],
        }
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn bandwidth(&self) -> usize {
        self.w
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.w, "({i}, {j}) outside bandwidth {}", self.w);
        i * (self.w + 1) + (j + self.w - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.w {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` to the symmetric pair `(i, j)` / `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn add_diag(&mut self, i: usize, v: f64) {
        self.add(i, i, v);
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (self.w + 1) + self.w]
    }

    /// Copies the band of a dense symmetric matrix (lower triangle read).
    pub fn from_dense(a: &Array2<f64>, bandwidth: usize) -> Self {
        let p = a.nrows();
        let mut m = Self::zeros(p, bandwidth);
        for i in 0..p {
            for j in i.saturating_sub(bandwidth)..=i {
                let s = m.slot(i, j);
                m.data[s] = a[[i, j]];
            }
        }
        m
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.p, self.p));
        for i in 0..self.p {
            for j in i.saturating_sub(self.w)..=i {
                let v = self.get(i, j);
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        a
    }

    /// `M v`
    pub fn matvec(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.p);
        let w = self.w;
        for i in 0..self.p {
            let row = &self.data[i * (w + 1)..(i + 1) * (w + 1)];
            let lo = i.saturating_sub(w);
            let mut acc = row[w] * v[i];
            for j in lo..i {
                let a = row[j + w - i];
                acc += a * v[j];
                out[j] += a * v[i];
            }
            out[i] += acc;
        }
        out
    }

    /// Banded Cholesky `M = L L^T`; fails with the offending pivot when `M`
    /// is not positive definite.
    pub fn cholesky(&self) -> Result<BandedFactor> {
        let (p, w) = (self.p, self.w);
        let stride = w + 1;
        let mut l = vec![0.0; p * stride];
        for i in 0..p {
            let lo = i.saturating_sub(w);
            for j in lo..=i {
                // columns lo..j of rows i and j
                let (head, tail) = l.split_at_mut(i * stride);
                let row_i = &mut tail[..stride];
                let si = |k: usize| k + w - i;
                let s = if j < i {
                    let row_j = &head[j * stride..(j + 1) * stride];
                    let sj = |k: usize| k + w - j;
                    self.data[i * stride + si(j)] - dot(&row_i[si(lo)..si(j)], &row_j[sj(lo)..sj(j)])
                } else {
                    self.data[i * stride + w] - dot(&row_i[si(lo)..w], &row_i[si(lo)..w])
                };
                if j == i {
                    if !(s > PIVOT_RTOL * self.data[i * stride + w].abs()) || !s.is_finite() {
                        return Err(FlrError::NotPositiveDefinite { pivot: i, value: s });
                    }
                    row_i[w] = s.sqrt();
                } else {
                    row_i[si(j)] = s / head[j * stride + w];
                }
            }
        }
        Ok(BandedFactor { p, w, l })
    }
}

/// Lower banded Cholesky factor, same layout as [`BandedSpdMatrix`].
#[derive(Debug, Clone)]
pub struct BandedFactor {
    p: usize,
    w: usize,
    l: Vec<f64>,
}

impl BandedFactor {
    /// Factor of the identity, i.e. no preconditioning.
    pub fn identity(p: usize) -> Self {
        Self {
            p,
            w: 0,
            l: vec![1.0; p],
        }
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn bandwidth(&self) -> usize {
        self.w
    }

    pub fn to_dense_lower(&self) -> Array2<f64> {
        let stride = self.w + 1;
        let mut a = Array2::zeros((self.p, self.p));
        for i in 0..self.p {
            for j in i.saturating_sub(self.w)..=i {
                a[[i, j]] = self.l[i * stride + j + self.w - i];
            }
        }
        a
    }

    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (p, w) = (self.p, self.w);
        let stride = w + 1;
        assert_eq!(x.len(), p, "right-hand side length");
        for i in 0..p {
            let lo = i.saturating_sub(w);
            let row = &self.l[i * stride..(i + 1) * stride];
            let s = dot(&row[lo + w - i..w], &x[lo..i]);
            x[i] = (x[i] - s) / row[w];
        }
        for i in (0..p).rev() {
            let row = &self.l[i * stride..(i + 1) * stride];
            let xi = x[i] / row[w];
            x[i] = xi;
            let lo = i.saturating_sub(w);
            for (xk, lik) in x[lo..i].iter_mut().zip(&row[lo + w - i..w]) {
                *xk -= lik * xi;
            }
        }
    }

    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Array1::from(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseCholesky;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tridiag(p: usize) -> BandedSpdMatrix {
        let mut m = BandedSpdMatrix::zeros(p, 1);
        for i in 0..p {
            m.add_diag(i, 2.0);
            if i + 1 < p {
                m.add(i + 1, i, -1.0);
            }
        }
        m
    }

    #[test]
    fn identity_factor() {
        let mut m = BandedSpdMatrix::zeros(5, 0);
        for i in 0..5 {
            m.add_diag(i, 1.0);
        }
        let f = m.cholesky().unwrap();
        assert_eq!(f.to_dense_lower(), Array2::<f64>::eye(5));
    }

    #[test]
    fn tridiagonal_reconstructs() {
        let m = tridiag(4);
        let l = m.cholesky().unwrap().to_dense_lower();
        let back = l.dot(&l.t());
        let err = (&back - &m.to_dense()).iter().fold(0.0f64, |a, d| a.max(d.abs()));
        assert!(err <= 1e-14, "reconstruction error {err}");
    }

    #[test]
    fn random_banded_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (p, w) = (50, 5);
        let mut m = BandedSpdMatrix::zeros(p, w);
        for i in 0..p {
            for j in i.saturating_sub(w)..i {
                m.add(i, j, rng.random_range(-1.0..1.0));
            }
        }
        // diagonal dominance
        for i in 0..p {
            m.add_diag(i, 2.0 * w as f64 + 1.0);
        }
        let b = Array1::from_shape_fn(p, |_| rng.random_range(-1.0..1.0));
        let x = m.cholesky().unwrap().solve(b.view());
        let want = DenseCholesky::factor(&m.to_dense()).unwrap().solve(b.view());
        let rel =
            (&x - &want).iter().fold(0.0f64, |a, d| a.max(d.abs())) / want.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        assert!(rel <= 1e-10);
        let mv = m.matvec(x.view());
        assert!((&mv - &b).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn non_pd_reports_pivot() {
        let mut m = tridiag(3);
        m.add_diag(2, -5.0);
        match m.cholesky() {
            Err(FlrError::NotPositiveDefinite { pivot: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
