//! Seeded generators for the five benchmark scenarios.
//!
//! C1 to C3 are one-dimensional (chain graph) with `p` coefficients, C4 is a
//! `q x q` coefficient image on a lattice, C5 is a synthetic denoising image.
//! Every generator is a pure function of the scenario and its seed.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FlrError, Result};
use crate::graph::PenaltyGraph;
use crate::problem::Problem;

/// Identifier of the random stream, written to problem metadata.
pub const PRNG_ID: &str = "chacha20/rand_chacha-0.9/standard-normal-ziggurat/rand_distr-0.5";

pub const DEFAULT_IMAGE_NOISE_SD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [Self::C1, Self::C2, Self::C3, Self::C4, Self::C5];

    pub fn name(self) -> &'static str {
        match self {
            Self::C1 => "c1",
            Self::C2 => "c2",
            Self::C3 => "c3",
            Self::C4 => "c4",
            Self::C5 => "c5",
        }
    }

    /// Whether the size parameter is an image side `q` rather than `p`.
    pub fn is_image(self) -> bool {
        matches!(self, Self::C4 | Self::C5)
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = FlrError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| FlrError::Scenario(format!("unknown scenario {s:?}")))
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Sample size; ignored by C5, where `n = q^2`.
    pub n: usize,
    /// `p` for C1 to C3, the image side `q` for C4 and C5.
    pub size: usize,
    pub seed: u64,
    /// Noise standard deviation, used by C5 only.
    pub noise_sd: f64,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, n: usize, size: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            size,
            seed,
            noise_sd: DEFAULT_IMAGE_NOISE_SD,
        }
    }

    /// Number of coefficients.
    pub fn p(&self) -> usize {
        if self.kind.is_image() {
            self.size * self.size
        } else {
            self.size
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.size;
        let bad = |msg: String| Err(FlrError::Scenario(msg));
        match self.kind {
            ScenarioKind::C1 if s < 126 => return bad(format!("c1 needs p >= 126, got {s}")),
            ScenarioKind::C2 | ScenarioKind::C3 if s == 0 || !s.is_multiple_of(10) => {
                return bad(format!("{} needs p divisible by 10, got {s}", self.kind))
            }
            ScenarioKind::C4 if s == 0 || !s.is_multiple_of(4) => {
                return bad(format!("c4 needs q divisible by 4, got {s}"))
            }
            ScenarioKind::C5 if s < 8 => return bad(format!("c5 needs q >= 8, got {s}")),
            _ => {}
        }
        if self.kind != ScenarioKind::C5 && self.n == 0 {
            return bad("sample size n must be positive".into());
        }
        if self.kind == ScenarioKind::C5 && !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!(
                "noise sd must be finite and non-negative, got {}",
                self.noise_sd
            ));
        }
        Ok(())
    }

    pub fn graph(&self) -> Result<PenaltyGraph> {
        if self.kind.is_image() {
            PenaltyGraph::lattice(self.size)
        } else {
            PenaltyGraph::chain(self.size)
        }
    }
}

/// A generated instance with zero penalties; set them with
/// [`Problem::with_lambdas`].
#[derive(Debug, Clone)]
pub struct Generated {
    pub problem: Problem,
    pub beta_true: Array1<f64>,
}

/// The scenario's true coefficients, 0-based.
pub fn true_beta(scenario: &Scenario) -> Result<Array1<f64>> {
    scenario.validate()?;
    let s = scenario.size;
    let mut beta = Array1::zeros(scenario.p());
    match scenario.kind {
        ScenarioKind::C1 => {
            beta.slice_mut(ndarray::s![0..20]).fill(2.0);
            beta[40] = 3.0;
            beta.slice_mut(ndarray::s![70..85]).fill(1.0);
            beta.slice_mut(ndarray::s![120..125]).fill(2.0);
        }
        ScenarioKind::C2 => {
            beta.slice_mut(ndarray::s![s / 10..2 * s / 10]).fill(1.0);
            beta.slice_mut(ndarray::s![2 * s / 10..4 * s / 10]).fill(2.0);
        }
        ScenarioKind::C3 => {
            beta.slice_mut(ndarray::s![..s / 2]).fill(1.0);
            beta.slice_mut(ndarray::s![s / 2..]).fill(-1.0);
        }
        ScenarioKind::C4 => {
            let b = s / 4;
            for k in 0..4 {
                for i in b * k..b * (k + 1) {
                    for j in b * k..b * (k + 1) {
                        beta[i * s + j] = 2.0;
                    }
                    for j in b * (3 - k)..b * (4 - k) {
                        beta[i * s + j] = -2.0;
                    }
                }
            }
        }
        ScenarioKind::C5 => beta = standardize(&synthetic_image(s)),
    }
    Ok(beta)
}

/// Gaussian design and response `y = X beta + N(0, 1)`; C5 delegates to
/// [`gen_image_problem`].
pub fn gen_problem(scenario: &Scenario) -> Result<Generated> {
    scenario.validate()?;
    if scenario.kind == ScenarioKind::C5 {
        return gen_image_problem(scenario.size, scenario.noise_sd, scenario.seed);
    }
    let beta = true_beta(scenario)?;
    let (n, p) = (scenario.n, scenario.p());
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
    let x = Array2::from_shape_simple_fn((n, p), || StandardNormal.sample(&mut rng));
    let mut y = x.dot(&beta);
    for v in y.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += e;
    }
    let problem = Problem::new(y, x, scenario.graph()?, 0.0, 0.0)?;
    Ok(Generated {
        problem,
        beta_true: beta,
    })
}

/// Denoising instance on `lattice(q)`: standardized synthetic image plus
/// `N(0, noise_sd^2)` noise, identity design.
pub fn gen_image_problem(q: usize, noise_sd: f64, seed: u64) -> Result<Generated> {
    let scenario = Scenario {
        noise_sd,
        ..Scenario::new(ScenarioKind::C5, q * q, q, seed)
    };
    scenario.validate()?;
    let truth = standardize(&synthetic_image(q));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut y = truth.clone();
    for v in y.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += noise_sd * e;
    }
    let problem = Problem::identity(y, PenaltyGraph::lattice(q)?, 0.0, 0.0)?;
    Ok(Generated {
        problem,
        beta_true: truth,
    })
}

/// Piecewise-constant test image in `[0, 1]`, row-major: background 0, a
/// centred rectangle at 0.5 with a smaller rectangle at 1 inside it, and a
/// bar at 1 near the top edge.
pub fn synthetic_image(q: usize) -> Array1<f64> {
    let mut img = Array1::zeros(q * q);
    let inside =
        |i: usize, j: usize, r0: usize, r1: usize, c0: usize, c1: usize| i >= r0 && i < r1 && j >= c0 && j < c1;
    for i in 0..q {
        for j in 0..q {
            img[i * q + j] = if inside(i, j, 3 * q / 8, 5 * q / 8, 3 * q / 8, 5 * q / 8) {
                1.0
            } else if inside(i, j, q / 4, 3 * q / 4, q / 8, 7 * q / 8) {
                0.5
            } else if inside(i, j, q / 16, q / 8, q / 4, 3 * q / 4) {
                1.0
            } else {
                0.0
            };
        }
    }
    img
}

/// Shifts and scales to mean 0 and (population) variance 1.
pub fn standardize(v: &Array1<f64>) -> Array1<f64> {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    let var = v.mapv(|x| (x - mean) * (x - mean)).sum() / n;
    let sd = var.sqrt();
    if sd > 0.0 {
        v.mapv(|x| (x - mean) / sd)
    } else {
        v.mapv(|x| x - mean)
    }
}
