//! Spectral theory of Hill operators `y'' + (E - q) y = 0` whose potential is a
//! Darboux-Treibich-Verdier elliptic function on a rectangular (or general)
//! torus.
//!
//! Building blocks, bottom up:
//! - [`elliptic`]: Weierstrass functions and lattice invariants;
//! - [`potential`]: the potentials, gap conditions and classification;
//! - [`floquet`]: monodromy, discriminant and periodic eigenvalue search;
//! - [`kdv`]: the stationary KdV recursion and the spectral polynomial;
//! - [`spectrum`]: band structure, gap reports, stability arcs, verification.

pub mod elliptic;
pub mod error;
pub mod floquet;
pub mod json;
pub mod kdv;
pub mod potential;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64;
