//! Radial pseudo-spectral solver for pseudo-relativistic Hartree ground
//! states and their non-relativistic asymptotic expansions.
//!
//! Radial functions `u(r)` are sampled at `r_i = (i+1)·dr` and mapped to
//! sine coefficients of `r·u(r)` by an orthonormal DST-I, where every radial
//! Fourier multiplier acts diagonally. The Coulomb convolution is evaluated in
//! physical space with Newton's shell theorem.

pub mod acceptance;
pub mod error;
pub mod expansion;
pub mod ground_state;
pub mod harness;
pub mod hartree;
pub mod linearized;
mod minres;
pub mod multiplier;
pub mod par;
pub mod params;
pub mod radial;

pub use error::{Error, Result};
pub use params::{PhysicalParams, SpeedOfLight};
pub use radial::{RadialField, RadialGrid, SpectralField};
