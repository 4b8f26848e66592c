//! Numerical laboratory for branching Brownian motion, branching random walks
//! and reaction-diffusion fronts in spatially periodic media.
//!
//! The crate is organised around one pipeline:
//!
//! * [`env`] represents periodic environments (branching rate, drift,
//!   volatility, offspring laws) and parses them from config text.
//! * [`eigen`] solves the periodic principal-eigenvalue problem behind the
//!   front constants `lambda_star`, `v_star` and the logarithmic front delay,
//!   for both continuous-space models and lattice walks.
//! * [`tilted`] simulates the drift-tilted one-particle diffusion, its level
//!   renewal times and barrier (ballot-type) probabilities.
//! * [`bbm`] and [`brw`] run population Monte Carlo for the continuous and
//!   lattice branching models, with front-window pruning.
//! * [`fkpp`] integrates the associated reaction-diffusion equation and
//!   tracks its front.
//! * [`stats`] fits tail exponents, builds fractional-part subsequence time
//!   grids and compares sample sets.
//! * [`verify`] bundles the end-to-end consistency checks used by the CLI
//!   and the acceptance test suite.
//!
//! All Monte Carlo entry points take a master seed and derive one
//! counter-based RNG stream per trial, so results are independent of worker
//! count and reproducible bit-for-bit; see [`trials`].

// Parameter guards are written `!(x > 0.0)` on purpose: the negation also
// rejects NaN, which `x <= 0.0` lets through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil and small-matrix loops keep explicit indices so the code lines up
// with the subscripts in the difference schemes.
#![allow(clippy::needless_range_loop)]

pub mod bbm;
pub mod brw;
pub mod env;
pub mod eigen;
pub mod error;
pub mod fkpp;
pub mod report;
pub mod stats;
pub mod tilted;
pub mod trials;
pub mod verify;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
