//! Spectral stabilization toolkit for the linearized water tank.
//!
//! The crate computes the eigenstructure of the transport operator that
//! governs small sloshing motions of an accelerated tank, checks moment
//! controllability under the interior acceleration control, builds a
//! backstepping feedback in modal coordinates and simulates the closed loop.
//!
//! Modules, from the bottom up:
//!
//! - [`model`]: parameters, grids, coordinate changes, inner product, mass.
//! - [`spectral`]: shooting for eigenvalues and eigenfunctions.
//! - [`control`]: moments, dual exponential families, open-loop steering.
//! - [`feedback`]: the stabilizing feedback law.
//! - [`backstepping`]: the modal Fredholm transform and its residuals.
//! - [`simulate`]: modal and finite-difference time integration, Lyapunov data.
//! - [`finite_dim`]: exact backstepping for finite-dimensional pairs.
//! - [`acceptance`]: the end-to-end checks with their tolerances.

pub mod acceptance;
pub mod backstepping;
pub mod control;
pub mod error;
pub mod feedback;
pub mod finite_dim;
pub mod model;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{Grid, GridFunction2, Params};
pub use spectral::{Basis, BcKind, EigenPair};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
