//! Variational gradient-damage energies on a slender cylinder and their
//! one-dimensional limit.
//!
//! The crate evaluates and minimizes the rescaled damage energy of a unit
//! cylinder at aspect ratio `delta`, the effective 1D energy it approaches
//! as `delta -> 0`, and ships the machinery to study that limit numerically:
//! recovery constructions, residual diagnostics, and a sweep harness.
//!
//! Numerical kernels are data-parallel over mesh cells (rayon, behind the
//! default `parallel` feature) with a sequential fallback. Reductions use a
//! fixed partitioning with compensated summation, so results are
//! bit-identical across thread counts and between the two modes.

// Negated comparisons are deliberate in validation code: `!(x > 0.0)`
// rejects NaN, `x <= 0.0` would let it through. Indexed loops over several
// parallel arrays are the prevailing style in the assembly kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod energy;
pub mod error;
pub mod exec;
pub mod fields;
pub mod io;
pub mod material;
pub mod mesh;
pub mod recovery;
pub mod rng;
pub mod solver;
pub mod study;
pub mod validate;

pub use error::{Error, Result};
