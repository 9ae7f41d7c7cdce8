//! Modal quantum dynamics on finite-dimensional Hilbert spaces.
//!
//! The library simulates the stochastic evolution of beables (definite-valued
//! properties) guided by a Schrödinger-evolving state. Projective measures
//! evolve under a Markov jump process built from probability currents and
//! Bell transition rates; positive operator measures are lifted to projective
//! measures on an enlarged space via Naimark extension; the position measure
//! admits a deterministic continuum limit (Bohmian trajectories) computed
//! through velocity fields. The worked model is a 1-D harmonic oscillator
//! under the Husimi (coherent-state) measure and the position measure.
//!
//! Units: ħ = 1 throughout; mass and frequency are dimensionless.

pub mod bohm;
pub mod error;
pub mod hilbert;
pub mod jump;
pub mod linalg;
pub mod naimark;
pub mod ode;
pub mod oscillator;
pub mod rng;
pub mod tol;
pub mod verify;

pub use error::ModalError;
pub use num_complex::Complex64 as C64;
