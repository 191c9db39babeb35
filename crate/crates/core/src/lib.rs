//! Solvers for fused lasso regression with generalized fusion penalties.
//!
//! The objective is
//!
//! ```text
//! 1/2 ||y - X beta||^2 + lambda1 sum_j |beta_j| + lambda2 sum_{(j,k) in E} |beta_j - beta_k|
//! ```
//!
//! where `E` is an arbitrary [`PenaltyGraph`]. The main solver is a
//! majorization-minimization scheme ([`mm_fit_dense`], [`mm_fit_pcg`]);
//! Split Bregman ([`sb_fit`]) and smoothed proximal gradient ([`spg_fit`])
//! are provided as reference baselines, and [`oracle`] holds independent
//! optimality checks.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod baselines;
pub mod datagen;
pub mod error;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod mm;
pub mod objective;
pub mod oracle;
pub mod pcg;
pub mod problem;

pub use baselines::{sb_fit, spg_fit, SpgConfig};
pub use datagen::{gen_image_problem, gen_problem, true_beta, Generated, Scenario, ScenarioKind};
pub use error::{FlrError, Result};
pub use graph::{DifferenceMatrix, PenaltyGraph};
pub use mm::{build_weights, init_beta, mm_fit_dense, mm_step_dense, FitResult, Termination, WeightMatrices};
pub use objective::{majorizer, objective, perturbed_objective, relative_error, soft_threshold};
pub use oracle::{brute_force_flsa, certify_optimality, OptimalityReport};
pub use pcg::{mm_fit_pcg, pcg_solve, PcgState};
pub use problem::{Design, GramPolicy, Problem, SolverConfig};
