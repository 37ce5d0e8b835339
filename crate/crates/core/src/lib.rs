//! Simulation of a quantum switch that superposes the two orders of a
//! squeezing and a displacement acting on the vacuum of one bosonic mode.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`]: truncated Fock-space states and unitaries, quadrature moments.
//! * [`gaussian`]: closed-form Gaussian algebra (braiding, overlaps,
//!   normalization factors, the reference covariance block, Gaussian Wigner).
//! * [`switch`]: the switch evolution, control measurement and conditional
//!   states.
//! * [`phase_space`]: Wigner functions on grids and their quadrature.
//! * [`measures`]: relative-entropy non-Gaussianity and Wigner negativity.
//! * [`cli`]: the `switchsim` command-line front end.
//!
//! Quadratures follow `q = (a + a†)/√2`, `p = (a − a†)/(i√2)`, so the vacuum
//! covariance is `I/2`. Squeezing is `S(r) = exp(r/2 (a†² − a²))`, which
//! stretches `q` by `e^r` and satisfies `S(r) D(α) = D(β) S(r)` with
//! `β = cosh(r) α + sinh(r) α*`.

pub mod bessel;
pub mod cli;
pub mod covariance;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod measures;
pub mod phase_space;
pub mod switch;

pub use covariance::CovarianceMatrix2;
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Schema tag written into every JSON document and CSV header.
pub const SCHEMA: &str = "switchsim/1";
