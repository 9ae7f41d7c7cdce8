//! Numerical tolerances used across the crate.
//!
//! All dense algebra is double precision on dimensions up to a few thousand,
//! which sets the scale of the "exact arithmetic" tolerances below.

/// State normalization residual accepted at construction.
pub const NORM_TOL: f64 = 1e-10;

/// Hermiticity residual `max |A - A†|` accepted at construction.
pub const HERM_TOL: f64 = 1e-10;

/// Most negative eigenvalue tolerated in a positive semidefinite effect.
pub const PSD_TOL: f64 = 1e-9;

/// Residual of `Σ_n E_n = 1` accepted for a complete measure.
pub const COMPLETENESS_TOL: f64 = 1e-9;

/// Idempotency/orthogonality residual for projective measures.
pub const PROJ_TOL: f64 = 1e-9;

/// Maximum renormalization correction accepted when truncating a state
/// with an infinite Fock tail.
pub const TRUNC_TOL: f64 = 1e-8;

/// Occupation probability below which a state counts as unoccupied; a
/// nonzero current out of such a state signals numerical inconsistency.
pub const P_FLOOR: f64 = 1e-12;

/// Position density below which a point counts as a node of the
/// wavefunction; velocity and momentum fields are singular there.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Local error target per accepted step of the adaptive integrator.
pub const ODE_TOL: f64 = 1e-9;

/// Acceptable deviation between a numerically integrated trajectory and a
/// closed-form reference. Sits well above `ODE_TOL` and below any
/// physically meaningful deviation.
pub const ODE_MATCH_TOL: f64 = 1e-6;

/// Naimark dilation identity residual over a random state battery.
pub const DILATION_TOL: f64 = 1e-9;

/// Relative factor against the term-magnitude sum used to detect a genuine
/// zero of the Husimi amplitude series rather than underflow.
pub const CHI_REL_FLOOR: f64 = 1e-12;
