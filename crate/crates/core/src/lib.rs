//! Exactly divergence-free H(div)-conforming finite elements for 2D
//! incompressible flow on the unit square.
//!
//! Velocities live in Raviart-Thomas spaces RT_k, pressures in discontinuous
//! P_k. Viscous terms use a symmetric interior penalty form, convection an
//! upwinded facet flux, and time stepping BDF2 with Newton's method for the
//! nonlinear case.

pub mod assembly;
pub mod benchmarks;
pub mod diagnostics;
pub mod error;
pub mod mesh;
pub mod quadrature;
pub mod reference;
pub mod solver;
pub mod space;
pub mod sparse;

pub use error::{Error, Result};

/// Caps the worker threads used by dense and sparse kernels; 0 runs serially.
pub fn set_worker_threads(n: usize) {
    faer::set_global_parallelism(match std::num::NonZeroUsize::new(n) {
        None => faer::Par::Seq,
        Some(n) => faer::Par::Rayon(n),
    });
}
