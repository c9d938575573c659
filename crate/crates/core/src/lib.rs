//! Capture of a nonrelativistic particle by a moving infinite string through a
//! separable potential, and the momentum and position tails produced when the
//! string develops a cusp.
//!
//! Units: `hbar = 1`, `m = 1/2`, so free evolution carries `exp(-i p^2 t)`.
//! Momentum integrals are raw `d^3p`; the inverse Fourier transform to
//! position space carries `(2 pi)^-3`.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod evolve;
pub mod geometry;
pub mod oscquad;
pub mod potential;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64;
