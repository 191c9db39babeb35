//! Reference solvers used to cross-check the MM solvers.

mod sb;
mod spg;

pub use sb::{sb_default_mu, sb_fit, sb_fit_with_state, SbState};
pub use spg::{smoothed_fusion, spg_fit, spg_lipschitz, SpgConfig};
