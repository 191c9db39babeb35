//! Penalty graphs and the difference (incidence) matrix they induce.
//!
//! A [`PenaltyGraph`] is the edge set `E` of the fusion penalty
//! `sum_{(j,k) in E} |beta_j - beta_k|`. Edges are stored as `(j, k)` with
//! `j < k`, strictly sorted and without duplicates, so every downstream
//! assembly (Laplacians, banded layouts) is deterministic.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{FlrError, Result};

/// Undirected, unweighted edge set over coefficient indices `0..p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PenaltyGraph {
    p: usize,
    edges: Vec<(usize, usize)>,
    bandwidth: usize,
}

impl PenaltyGraph {
    /// One-dimensional chain: edges `(j, j+1)`.
    pub fn chain(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(FlrError::InvalidDimension("chain graph needs p >= 1".into()));
        }
        let edges = (0..p - 1).map(|j| (j, j + 1)).collect();
        Ok(Self::from_sorted(p, edges))
    }

    /// `q x q` lattice under row-major vectorization: pixel `(i, j)` is index
    /// `i * q + j`. Horizontal neighbours differ by 1, vertical ones by `q`.
    pub fn lattice(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(FlrError::InvalidDimension("lattice graph needs q >= 1".into()));
        }
        let mut edges = Vec::with_capacity(2 * q * (q - 1));
        for i in 0..q {
            for j in 0..q {
                let v = i * q + j;
                if j + 1 < q {
                    edges.push((v, v + 1));
                }
                if i + 1 < q {
                    edges.push((v, v + q));
                }
            }
        }
        edges.sort_unstable();
        Ok(Self::from_sorted(q * q, edges))
    }

    /// Arbitrary edge set. Pairs are normalized to `j < k`, sorted and
    /// deduplicated; self-loops and out-of-range indices are rejected.
    pub fn custom(p: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if p == 0 {
            return Err(FlrError::InvalidDimension("graph needs p >= 1".into()));
        }
        let mut edges = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a >= p || b >= p {
                return Err(FlrError::InvalidEdge {
                    j: a,
                    k: b,
                    reason: format!("index out of range for p = {p}"),
                });
            }
            if a == b {
                return Err(FlrError::InvalidEdge {
                    j: a,
                    k: b,
                    reason: "self-loop".into(),
                });
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_sorted(p, edges))
    }

    fn from_sorted(p: usize, edges: Vec<(usize, usize)>) -> Self {
        let bandwidth = edges.iter().map(|&(j, k)| k - j).max().unwrap_or(0);
        Self { p, edges, bandwidth }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of edges, `m = |E|`.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// `max(k - j)` over edges, 0 for an empty edge set.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.p];
        for &(j, k) in &self.edges {
            deg[j] += 1;
            deg[k] += 1;
        }
        deg
    }

    /// `sum_{(j,k) in E} |beta_j - beta_k|`, evaluated edge by edge.
    pub fn fusion_norm(&self, beta: ArrayView1<f64>) -> f64 {
        self.edges.iter().map(|&(j, k)| (beta[j] - beta[k]).abs()).sum()
    }

    pub fn difference_matrix(&self) -> DifferenceMatrix {
        DifferenceMatrix {
            p: self.p,
            rows: self.edges.clone(),
        }
    }

    /// Parses the text format: a header line `p m`, then `m` lines `j k`.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader
            .lines()
            .map(|l| l.map_err(FlrError::from))
            .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let header = lines
            .next()
            .ok_or_else(|| FlrError::Parse("graph file is empty".into()))??;
        let (p, m) = parse_pair(&header, 1)?;
        let mut pairs = Vec::with_capacity(m);
        for (i, line) in lines.enumerate() {
            let line = line?;
            pairs.push(parse_pair(&line, i + 2)?);
        }
        if pairs.len() != m {
            return Err(FlrError::Parse(format!(
                "graph header declares {m} edges, found {}",
                pairs.len()
            )));
        }
        Self::custom(p, &pairs)
    }

    pub fn write_text<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 * (self.m() + 1));
        let _ = writeln!(out, "{} {}", self.p, self.m());
        for &(j, k) in &self.edges {
            let _ = writeln!(out, "{j} {k}");
        }
        out
    }
}

fn parse_pair(line: &str, lineno: usize) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(str::parse::<usize>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(FlrError::Parse(format!(
            "line {lineno}: expected two non-negative integers, got {line:?}"
        ))),
    }
}

/// Sparse `m x p` incidence matrix: row `r` for edge `(j, k)` holds `+1` at
/// `j` (the smaller index) and `-1` at `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceMatrix {
    p: usize,
    rows: Vec<(usize, usize)>,
}

impl DifferenceMatrix {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    /// `(j, k)` such that row `r` is `e_j - e_k`.
    pub fn row(&self, r: usize) -> (usize, usize) {
        self.rows[r]
    }

    /// `D v`
    pub fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        self.rows.iter().map(|&(j, k)| v[j] - v[k]).collect()
    }

    /// `D^T w`
    pub fn apply_transpose(&self, w: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.p);
        for (r, &(j, k)) in self.rows.iter().enumerate() {
            out[j] += w[r];
            out[k] -= w[r];
        }
        out
    }

    /// `||D v||_1`
    pub fn l1_norm_of_product(&self, v: ArrayView1<f64>) -> f64 {
        self.rows.iter().map(|&(j, k)| (v[j] - v[k]).abs()).sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.rows.len(), self.p));
        for (r, &(j, k)) in self.rows.iter().enumerate() {
            d[[r, j]] = 1.0;
            d[[r, k]] = -1.0;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn chain_edges() {
        assert_eq!(PenaltyGraph::chain(1).unwrap().m(), 0);
        assert_eq!(PenaltyGraph::chain(1).unwrap().bandwidth(), 0);
        let g = PenaltyGraph::chain(4).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 3)]);
        let g = PenaltyGraph::chain(200).unwrap();
        assert_eq!(g.m(), 199);
        assert_eq!(g.bandwidth(), 1);
        assert!(matches!(PenaltyGraph::chain(0), Err(FlrError::InvalidDimension(_))));
    }

    #[test]
    fn lattice_edges() {
        assert_eq!(PenaltyGraph::lattice(1).unwrap().m(), 0);
        let g = PenaltyGraph::lattice(2).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 3), (2, 3)]);
        let g = PenaltyGraph::lattice(16).unwrap();
        assert_eq!(g.m(), 480);
        assert_eq!(g.bandwidth(), 16);
        assert_eq!(g.p(), 256);
        assert!(PenaltyGraph::lattice(0).is_err());
    }

    #[test]
    fn custom_normalizes() {
        let g = PenaltyGraph::custom(3, &[(2, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2)]);
        let g = PenaltyGraph::custom(3, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        match PenaltyGraph::custom(2, &[(0, 0)]) {
            Err(FlrError::InvalidEdge { j: 0, k: 0, .. }) => {}
            other => panic!("expected self-loop error, got {other:?}"),
        }
        match PenaltyGraph::custom(2, &[(0, 5)]) {
            Err(FlrError::InvalidEdge { j: 0, k: 5, .. }) => {}
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn difference_rows() {
        let d = PenaltyGraph::chain(3).unwrap().difference_matrix();
        assert_eq!(d.to_dense(), array![[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]]);
        assert_eq!(d.l1_norm_of_product(array![1.0, 3.0, 2.0].view()), 3.0);
        let empty = PenaltyGraph::chain(1).unwrap().difference_matrix();
        assert_eq!(empty.nrows(), 0);
    }

    fn laplacian(g: &PenaltyGraph) -> Array2<f64> {
        let mut l = Array2::zeros((g.p(), g.p()));
        for (v, d) in g.degrees().into_iter().enumerate() {
            l[[v, v]] = d as f64;
        }
        for &(j, k) in g.edges() {
            l[[j, k]] = -1.0;
            l[[k, j]] = -1.0;
        }
        l
    }

    #[test]
    fn dtd_is_laplacian() {
        for g in [PenaltyGraph::chain(5).unwrap(), PenaltyGraph::lattice(3).unwrap()] {
            let d = g.difference_matrix().to_dense();
            assert_eq!(d.t().dot(&d), laplacian(&g));
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let g = PenaltyGraph::lattice(3).unwrap();
        let d = g.difference_matrix();
        let v = Array1::from_iter((0..9).map(|i| (i as f64 * 0.7).sin()));
        let w = Array1::from_iter((0..d.nrows()).map(|i| (i as f64 * 1.3).cos()));
        let lhs = d.apply(v.view()).dot(&w);
        let rhs = v.dot(&d.apply_transpose(w.view()));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn text_roundtrip() {
        let g = PenaltyGraph::lattice(3).unwrap();
        let text = g.to_text();
        assert!(text.starts_with("9 12\n0 1\n0 3\n"));
        let back = PenaltyGraph::read_text(text.as_bytes()).unwrap();
        assert_eq!(back, g);
        assert!(PenaltyGraph::read_text("3 2\n0 1\n".as_bytes()).is_err());
        assert!(PenaltyGraph::read_text("3 1\n0 x\n".as_bytes()).is_err());
    }
}
