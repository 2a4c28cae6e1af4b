//! Certified stability analysis for discrete-time compartmental traffic
//! networks with bounded demand uncertainty.
//!
//! The crate is `no_std` with `alloc`. Everything is deterministic: random
//! sampling is driven by explicitly seeded ChaCha streams.
//!
//! Layout:
//! - [`demand`]: demand functions, their Lipschitz and deviation bounds.
//! - [`model`]: network validation, equilibrium and the one-step map.
//! - [`comparison`]: the linear comparison matrix bounding the error dynamics.
//! - [`spectral`]: spectral-radius bounds for nonnegative matrices.
//! - [`trapping`]: trapping-box construction and verification.
//! - [`simulator`]: trajectories, decay fits, Lyapunov checks and sweeps.
//! - [`certify`]: end-to-end certificates.
#![cfg_attr(not(test), no_std)]
// Negated comparisons are the NaN-rejecting form; index loops mirror the
// componentwise formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod certify;
pub mod comparison;
pub mod demand;
pub mod disturbance;
mod linalg;
mod math;
pub mod model;
pub mod simulator;
pub mod spectral;
pub mod trapping;

pub use certify::{BoundUsed, Certificate, Method, OmegaChoice, Verdict};
pub use comparison::{GammaMatrix, GammaParams};
pub use demand::{Demand, DemandRef, DisturbanceMode, PiecewiseLinearDemand, Side};
pub use disturbance::DisturbanceBox;
pub use model::{Equilibrium, FreewaySpec, NetworkSpec, System, ValidatedNetwork};
pub use spectral::NonnegativeMatrix;
pub use trapping::{GridRule, StateBox, TrapReport};

/// Default grid resolution for suprema over state intervals.
pub const DEFAULT_GRID: usize = 2000;

/// Default tolerance for spectral-radius computations.
pub const DEFAULT_RHO_TOL: f64 = 1e-10;
