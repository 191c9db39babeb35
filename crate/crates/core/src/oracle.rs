//! Independent correctness checks: a subgradient optimality certificate for
//! any candidate point, and exhaustive grid search for tiny signal
//! approximator instances. Nothing here calls into the solvers.

use std::collections::VecDeque;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{FlrError, Result};
use crate::graph::PenaltyGraph;
use crate::problem::Problem;

/// Smallest magnitude treated as nonzero when choosing between a fixed sign
/// and a free subgradient.
pub const FUSION_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub certified: bool,
    /// Smallest achievable infinity norm of the stationarity residual over
    /// all admissible subgradient choices.
    pub worst_violation: f64,
    pub tolerance: f64,
    /// Magnitude threshold below which terms received free subgradients.
    pub threshold: f64,
    /// `2 * sum(lambda |arg|)` over terms with free subgradients. A zero
    /// residual certifies that `beta` is within this much of the optimum.
    pub approximation_gap: f64,
    /// Chosen subgradient of `|beta_j|`, one per coordinate.
    pub coordinate_subgradients: Vec<f64>,
    /// Chosen subgradient of `|beta_j - beta_k|`, one per edge.
    pub edge_subgradients: Vec<f64>,
}

/// Decides whether `0` lies in the subdifferential of the objective at `beta`
/// up to `tol`.
///
/// The threshold is `max(FUSION_THRESHOLD, tol)`. Solvers built on the
/// perturbation `|t| + eps` leave fused differences of order
/// `eps / (1 - |t|)`; forcing a sign on those leaves a residual of
/// `lambda2 * eps / (|d| + eps)`, which is about `lambda2 / 2` at `|d| = eps`.
pub fn certify_optimality(problem: &Problem, beta: ArrayView1<f64>, tol: f64) -> Result<OptimalityReport> {
    certify_optimality_with_threshold(problem, beta, tol, FUSION_THRESHOLD.max(tol))
}

/// As [`certify_optimality`] with an explicit threshold `tau`.
///
/// Terms with argument above `tau` in magnitude get their sign; the rest get
/// free subgradients in `[-1, 1]`. The smallest slack `z` for which
///
/// ```text
/// | g_j + lambda1 s_j + lambda2 (D^T t)_j | <= z   for all j
/// ```
///
/// is feasible is found by bisection, each probe being a circulation
/// feasibility problem solved by max-flow.
pub fn certify_optimality_with_threshold(
    problem: &Problem,
    beta: ArrayView1<f64>,
    tol: f64,
    tau: f64,
) -> Result<OptimalityReport> {
    problem.check_len("beta", beta)?;
    if !(tol >= 0.0) || !(tau >= 0.0) {
        return Err(FlrError::InvalidParameter(format!(
            "tolerance {tol} and threshold {tau} must be non-negative"
        )));
    }
    let p = problem.p();
    let (l1, l2) = (problem.lambda1(), problem.lambda2());
    let edges = problem.graph().edges();

    let resid = &problem.x_dot(beta) - problem.y();
    let mut c = problem.xt_dot(resid.view());

    let mut s = vec![0.0; p];
    let mut free_coord = vec![false; p];
    let mut gap = 0.0;
    for j in 0..p {
        if beta[j].abs() > tau {
            s[j] = beta[j].signum();
            c[j] += l1 * s[j];
        } else {
            free_coord[j] = true;
            gap += 2.0 * l1 * beta[j].abs();
        }
    }
    let mut t = vec![0.0; edges.len()];
    let mut free_edges = Vec::new();
    for (e, &(j, k)) in edges.iter().enumerate() {
        let d = beta[j] - beta[k];
        if d.abs() > tau {
            t[e] = d.signum();
            c[j] += l2 * t[e];
            c[k] -= l2 * t[e];
        } else {
            free_edges.push(e);
            gap += 2.0 * l2 * d.abs();
        }
    }
    let slack_room: Vec<f64> = (0..p).map(|j| if free_coord[j] { l1 } else { 0.0 }).collect();

    let flow = FlowCheck {
        p,
        c: c.as_slice().expect("contiguous"),
        room: &slack_room,
        edges,
        free_edges: &free_edges,
        cap: l2,
    };

    // z at which the zero flow is already feasible
    let mut hi = (0..p)
        .map(|j| (c[j].abs() - slack_room[j]).max(0.0))
        .fold(0.0, f64::max);
    let mut best = vec![0.0; free_edges.len()];
    if hi > 0.0 && !free_edges.is_empty() {
        let scale = 1.0 + c.iter().fold(0.0f64, |a, v| a.max(v.abs())) + l1 + l2 * p as f64;
        if let Some(f) = flow.feasible(0.0, scale) {
            best = f;
        } else {
            let mut lo = 0.0;
            while hi - lo > 1e-12 * scale {
                let mid = 0.5 * (lo + hi);
                match flow.feasible(mid, scale) {
                    Some(f) => {
                        hi = mid;
                        best = f;
                    }
                    None => lo = mid,
                }
            }
        }
    }

    // recover subgradients from the flows and measure the residual exactly
    let mut net = c.clone();
    for (i, &e) in free_edges.iter().enumerate() {
        let (j, k) = edges[e];
        let te = if l2 > 0.0 { (best[i] / l2).clamp(-1.0, 1.0) } else { 0.0 };
        t[e] = te;
        net[j] += l2 * te;
        net[k] -= l2 * te;
    }
    let mut worst = 0.0f64;
    for j in 0..p {
        if free_coord[j] {
            let sj = if l1 > 0.0 { (-net[j] / l1).clamp(-1.0, 1.0) } else { 0.0 };
            s[j] = sj;
            net[j] += l1 * sj;
        }
        worst = worst.max(net[j].abs());
    }

    Ok(OptimalityReport {
        certified: worst <= tol,
        worst_violation: worst,
        tolerance: tol,
        threshold: tau,
        approximation_gap: gap,
        coordinate_subgradients: s,
        edge_subgradients: t,
    })
}

/// Edge flows `f_e = lambda2 t_e` in `[-cap, cap]`; node `j` must have net
/// outflow in `[-c_j - room_j - z, -c_j + room_j + z]`.
struct FlowCheck<'a> {
    p: usize,
    c: &'a [f64],
    room: &'a [f64],
    edges: &'a [(usize, usize)],
    free_edges: &'a [usize],
    cap: f64,
}

impl FlowCheck<'_> {
    /// Returns edge flows (indexed like `free_edges`) if feasible at `z`.
    fn feasible(&self, z: f64, scale: f64) -> Option<Vec<f64>> {
        let p = self.p;
        // nodes: 0..p graph, p = hub, p+1 = source, p+2 = sink
        let (hub, src, snk) = (p, p + 1, p + 2);
        let mut net = Dinic::new(p + 3);
        let mut excess = vec![0.0; p + 3];
        let mut add = |net: &mut Dinic, u: usize, v: usize, lo: f64, hi: f64| {
            excess[v] += lo;
            excess[u] -= lo;
            net.add_edge(u, v, hi - lo)
        };
        let mut arcs = Vec::with_capacity(self.free_edges.len());
        for &e in self.free_edges {
            let (j, k) = self.edges[e];
            arcs.push(add(&mut net, j, k, -self.cap, self.cap));
        }
        for j in 0..p {
            let r = self.room[j] + z;
            add(&mut net, hub, j, -self.c[j] - r, -self.c[j] + r);
        }
        let mut demand = 0.0;
        for (v, &x) in excess.iter().enumerate() {
            if x > 0.0 {
                net.add_edge(src, v, x);
                demand += x;
            } else if x < 0.0 {
                net.add_edge(v, snk, -x);
            }
        }
        let sent = net.max_flow(src, snk, 1e-15 * scale);
        if sent >= demand - 1e-12 * scale * (p as f64 + 1.0) {
            Some(arcs.iter().map(|&a| net.flow(a) - self.cap).collect())
        } else {
            None
        }
    }
}

struct Dinic {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    orig: Vec<f64>,
}

impl Dinic {
    fn new(n: usize) -> Self {
        Self {
            head: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
            orig: Vec::new(),
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: f64) -> usize {
        let id = self.to.len();
        self.head[u].push(id);
        self.to.push(v);
        self.cap.push(c);
        self.orig.push(c);
        self.head[v].push(id + 1);
        self.to.push(u);
        self.cap.push(0.0);
        self.orig.push(0.0);
        id
    }

    fn flow(&self, id: usize) -> f64 {
        self.orig[id] - self.cap[id]
    }

    fn max_flow(&mut self, s: usize, t: usize, eps: f64) -> f64 {
        let n = self.head.len();
        let mut total = 0.0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &id in &self.head[u] {
                    let v = self.to[id];
                    if self.cap[id] > eps && level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if level[t] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; n];
            loop {
                let pushed = self.augment(s, t, &level, &mut next, eps);
                if pushed <= eps {
                    break;
                }
                total += pushed;
            }
        }
    }

    /// One blocking-flow augmenting path, iterative DFS.
    fn augment(&mut self, s: usize, t: usize, level: &[usize], next: &mut [usize], eps: f64) -> f64 {
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let push = path.iter().map(|&id| self.cap[id]).fold(f64::INFINITY, f64::min);
                for &id in &path {
                    self.cap[id] -= push;
                    self.cap[id ^ 1] += push;
                }
                return push;
            }
            let mut advanced = false;
            while next[u] < self.head[u].len() {
                let id = self.head[u][next[u]];
                let v = self.to[id];
                if self.cap[id] > eps && level[v] == level[u] + 1 {
                    path.push(id);
                    u = v;
                    advanced = true;
                    break;
                }
                next[u] += 1;
            }
            if !advanced {
                // dead end: retreat and skip the arc that led here
                match path.pop() {
                    Some(id) => {
                        u = self.to[id ^ 1];
                        next[u] += 1;
                    }
                    None => return 0.0,
                }
            }
        }
    }
}

const FINE: f64 = 1e-6;
const COARSE_UNITS: i64 = 10_000;
const MID_UNITS: i64 = 100;
const WINDOW: i64 = 8;

/// Minimizes the signal approximator objective (identity design, `p <= 3`)
/// by grid search: a coarse grid at step `1e-2`, then local passes at `1e-4`
/// and `1e-6` re-centred until the incumbent stops moving. All grids are
/// integer multiples of `1e-6`, so zeros and exact ties are representable.
pub fn brute_force_flsa(y: ArrayView1<f64>, lambda1: f64, lambda2: f64, graph: &PenaltyGraph) -> Result<Array1<f64>> {
    let p = y.len();
    if graph.p() != p {
        return Err(FlrError::DimensionMismatch {
            what: "graph nodes",
            expected: p,
            got: graph.p(),
        });
    }
    if p > 3 {
        return Err(FlrError::InvalidDimension(format!(
            "brute force supports p <= 3, got {p}"
        )));
    }
    if p == 0 {
        return Ok(Array1::zeros(0));
    }
    let ys: Vec<f64> = y.to_vec();
    let edges = graph.edges().to_vec();
    let f = |units: &[i64]| -> f64 {
        let mut v = 0.0;
        for (u, yj) in units.iter().zip(&ys) {
            let b = *u as f64 * FINE;
            v += 0.5 * (yj - b) * (yj - b) + lambda1 * b.abs();
        }
        for &(j, k) in &edges {
            v += lambda2 * ((units[j] - units[k]) as f64 * FINE).abs();
        }
        v
    };

    let ymin = ys.iter().cloned().fold(0.0f64, f64::min) - 1.0;
    let ymax = ys.iter().cloned().fold(0.0f64, f64::max) + 1.0;
    let lo = (ymin / (COARSE_UNITS as f64 * FINE)).floor() as i64;
    let hi = (ymax / (COARSE_UNITS as f64 * FINE)).ceil() as i64;

    let mut best = coarse_search(p, lo, hi, COARSE_UNITS, &f);
    for step in [MID_UNITS, 1] {
        best = local_search(best, step, &f);
    }
    Ok(Array1::from_iter(best.iter().map(|&u| u as f64 * FINE)))
}

/// Enumerates the first `p - 1` coordinates over `lo..=hi` (in multiples of
/// `step`) and minimizes the last by bisection on its forward difference,
/// which is exact because the objective is convex along each axis.
fn coarse_search(p: usize, lo: i64, hi: i64, step: i64, f: &impl Fn(&[i64]) -> f64) -> Vec<i64> {
    let mut best = vec![0i64; p];
    let mut best_val = f(&best);
    let mut point = vec![0i64; p];
    let outer = (hi - lo + 1).pow(p as u32 - 1);
    for idx in 0..outer {
        let mut r = idx;
        for slot in point.iter_mut().take(p - 1) {
            *slot = (lo + r % (hi - lo + 1)) * step;
            r /= hi - lo + 1;
        }
        let (mut a, mut b) = (lo, hi);
        while a < b {
            let m = a + (b - a) / 2;
            point[p - 1] = m * step;
            let fm = f(&point);
            point[p - 1] = (m + 1) * step;
            if f(&point) >= fm {
                b = m;
            } else {
                a = m + 1;
            }
        }
        point[p - 1] = a * step;
        let v = f(&point);
        if v < best_val {
            best_val = v;
            best.copy_from_slice(&point);
        }
    }
    best
}

/// Full box search of half-width `WINDOW` steps around the incumbent,
/// repeated until the incumbent is the box minimum.
fn local_search(mut best: Vec<i64>, step: i64, f: &impl Fn(&[i64]) -> f64) -> Vec<i64> {
    let p = best.len();
    let side = 2 * WINDOW + 1;
    let mut best_val = f(&best);
    loop {
        let centre = best.clone();
        let mut point = centre.clone();
        for idx in 0..side.pow(p as u32) {
            let mut r = idx;
            for (slot, c) in point.iter_mut().zip(&centre) {
                *slot = c + (r % side - WINDOW) * step;
                r /= side;
            }
            let v = f(&point);
            if v < best_val {
                best_val = v;
                best.copy_from_slice(&point);
            }
        }
        if best == centre {
            return best;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::soft_threshold;
    use ndarray::{array, Array2};

    fn flsa(y: Array1<f64>, l1: f64, l2: f64) -> Problem {
        let p = y.len();
        Problem::identity(y, PenaltyGraph::chain(p).unwrap(), l1, l2).unwrap()
    }

    #[test]
    fn fused_point_certified() {
        let prob = flsa(array![1.0, 3.0], 0.0, 1.0);
        let rep = certify_optimality(&prob, array![2.0, 2.0].view(), 1e-10).unwrap();
        assert!(rep.certified, "{rep:?}");
        assert!(rep.worst_violation <= 1e-10);
        assert!((rep.edge_subgradients[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn nearly_fused_point_within_tolerance() {
        // optimum (2, 2) needs t = -1/2; a 2e-8 split forces t = -1 at the
        // bare threshold
        let prob = flsa(array![1.0, 3.0], 0.0, 2.0);
        let beta = array![2.0, 2.0 + 2e-8];
        let strict = certify_optimality_with_threshold(&prob, beta.view(), 1e-3, FUSION_THRESHOLD).unwrap();
        assert!(!strict.certified);
        assert!((strict.worst_violation - 1.0).abs() < 1e-6);
        let rep = certify_optimality(&prob, beta.view(), 1e-3).unwrap();
        assert!(rep.certified, "{rep:?}");
        assert_eq!(rep.threshold, 1e-3);
        assert!((rep.approximation_gap - 8e-8).abs() < 1e-12);
    }

    #[test]
    fn data_point_not_certified() {
        let prob = flsa(array![1.0, 3.0], 0.0, 1.0);
        let rep = certify_optimality(&prob, array![1.0, 3.0].view(), 1e-3).unwrap();
        assert!(!rep.certified);
        assert!(rep.worst_violation >= 1.0 - 1e-12, "{}", rep.worst_violation);
    }

    #[test]
    fn least_squares_point_certified() {
        let x = array![[1.0, 0.5], [0.2, 2.0], [1.5, -1.0], [0.3, 0.3]];
        let y = array![1.0, 2.0, -0.5, 0.7];
        let g = x.t().dot(&x);
        let r = x.t().dot(&y);
        // 2x2 normal equations by Cramer's rule
        let det = g[[0, 0]] * g[[1, 1]] - g[[0, 1]] * g[[1, 0]];
        let b = array![
            (r[0] * g[[1, 1]] - g[[0, 1]] * r[1]) / det,
            (g[[0, 0]] * r[1] - g[[1, 0]] * r[0]) / det
        ];
        let prob = Problem::new(y, x, PenaltyGraph::chain(2).unwrap(), 0.0, 0.0).unwrap();
        let rep = certify_optimality(&prob, b.view(), 1e-10).unwrap();
        assert!(rep.certified && rep.worst_violation <= 1e-10, "{rep:?}");
    }

    #[test]
    fn lasso_zero_uses_free_sign() {
        // |y_j| <= lambda1 puts beta_j = 0 with s_j = y_j / lambda1
        let prob = flsa(array![0.4, -2.0], 1.0, 0.0);
        let rep = certify_optimality(&prob, array![0.0, -1.0].view(), 1e-12).unwrap();
        assert!(rep.certified, "{rep:?}");
        assert!((rep.coordinate_subgradients[0] - 0.4).abs() < 1e-12);
        assert_eq!(rep.coordinate_subgradients[1], -1.0);
    }

    #[test]
    fn lattice_group_needs_flow() {
        // all four pixels fused at the mean; edge subgradients must route
        // the residual imbalance around the square
        let y = array![1.0, 0.0, 0.0, -1.0];
        let prob = Problem::identity(y, PenaltyGraph::lattice(2).unwrap(), 0.0, 1.0).unwrap();
        let rep = certify_optimality(&prob, Array1::zeros(4).view(), 1e-10).unwrap();
        assert!(rep.certified, "{rep:?}");
        // too little fusion strength: slack is the excess over lambda2 * degree
        let weak = prob.with_lambdas(0.0, 0.25).unwrap();
        let rep = certify_optimality(&weak, Array1::zeros(4).view(), 1e-3).unwrap();
        assert!((rep.worst_violation - 0.5).abs() < 1e-9, "{}", rep.worst_violation);
    }

    #[test]
    fn general_design_report_shapes() {
        let x = Array2::from_shape_fn((3, 3), |(i, j)| {
            (i + 2 * j) as f64 * 0.1 + if i == j { 1.0 } else { 0.0 }
        });
        let prob = Problem::new(array![1.0, 2.0, 3.0], x, PenaltyGraph::chain(3).unwrap(), 0.1, 0.1).unwrap();
        let rep = certify_optimality(&prob, Array1::zeros(3).view(), 1e-3).unwrap();
        assert_eq!(rep.coordinate_subgradients.len(), 3);
        assert_eq!(rep.edge_subgradients.len(), 2);
        assert!(!rep.certified);
    }

    #[test]
    fn brute_force_one_dimensional() {
        let g = PenaltyGraph::chain(1).unwrap();
        for l1 in [0.0, 0.7, 6.0] {
            let b = brute_force_flsa(array![5.0].view(), l1, 3.0, &g).unwrap();
            assert!((b[0] - soft_threshold(5.0, l1)).abs() <= 1e-6, "{l1}: {b}");
        }
    }

    #[test]
    fn brute_force_interior_pair() {
        let g = PenaltyGraph::chain(2).unwrap();
        let b = brute_force_flsa(array![1.0, 3.0].view(), 0.0, 0.5, &g).unwrap();
        assert!((b[0] - 1.5).abs() <= 1e-4 && (b[1] - 2.5).abs() <= 1e-4, "{b}");
    }

    #[test]
    fn brute_force_zero_data() {
        let g = PenaltyGraph::chain(3).unwrap();
        let b = brute_force_flsa(array![0.0, 0.0, 0.0].view(), 0.3, 1.0, &g).unwrap();
        assert_eq!(b, array![0.0, 0.0, 0.0]);
    }

    #[test]
    fn brute_force_is_certified() {
        let g = PenaltyGraph::chain(3).unwrap();
        let y = array![-2.0, 1.5, 1.2];
        let b = brute_force_flsa(y.view(), 0.3, 1.0, &g).unwrap();
        let prob = Problem::identity(y, g, 0.3, 1.0).unwrap();
        let rep = certify_optimality(&prob, b.view(), 1e-3).unwrap();
        assert!(rep.certified, "{b} {rep:?}");
    }

    #[test]
    fn brute_force_rejects_large_p() {
        let g = PenaltyGraph::chain(4).unwrap();
        assert!(brute_force_flsa(Array1::zeros(4).view(), 0.0, 0.0, &g).is_err());
    }
}
