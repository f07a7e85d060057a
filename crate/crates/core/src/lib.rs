//! Numerical workbench for the linearized hard-sphere Boltzmann equation.
//!
//! The crate is organised bottom-up:
//!
//! * [`collision_core`] — velocity grids, the linearized collision operator
//!   `L = νI − K`, its null space, the bilinear form `Γ`, and the homogeneous
//!   initial-layer relaxation.
//! * [`layer_geometry`] — curved-slab boundary-layer geometry: potentials,
//!   forces, the weight `ζ`, and characteristics.
//! * [`domain_tracer`] — backward characteristics with diffuse reflection in
//!   a ball: hitting times, stochastic cycles, and exit-measure estimates.
//! * [`milne_solver`] — the ε-Milne problem with geometric correction, its
//!   far-field limit, the corrector, and macroscopic cross-checks.
//! * [`expansion_builder`] — Hilbert-expansion coefficients and order-by-order
//!   kinetic identities.
//! * [`cli_harness`] — configuration, orchestration, and output for the
//!   `hsmilne` binary.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod cli_harness;
pub mod collision_core;
pub mod domain_tracer;
pub mod error;
pub mod expansion_builder;
pub mod layer_geometry;
pub mod milne_solver;
pub mod linalg;
pub mod quadrature;

pub use error::{Error, Result};
