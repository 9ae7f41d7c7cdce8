//! Deterministic continuum modal dynamics: velocity operators and fields,
//! trajectory integration, and the position-lattice diagnostics that
//! separate Hamiltonians with a continuum limit (quadratic in the conjugate
//! variable) from those without (cubic).

use num_complex::Complex64 as C64;

use crate::error::{ModalError, Result};
use crate::hilbert::{
    position_amplitude_derivatives, position_amplitudes, HermitianOperator, PureState,
};
use crate::jump::CurrentMatrix;
use crate::linalg::CMatrix;
use crate::ode::{self, OdeFailure, OdeOptions, OdePath, OdeStop};
use crate::tol;

/// Uniform 1-D position lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, points: usize) -> Self {
        assert!(points >= 2 && x_max > x_min);
        Grid1D {
            x_min,
            x_max,
            points,
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.points - 1) as f64
    }

    pub fn position(&self, n: usize) -> f64 {
        self.x_min + n as f64 * self.spacing()
    }

    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.spacing()).round();
        (i.max(0.0) as usize).min(self.points - 1)
    }
}

/// Lattice Hamiltonian kinds, by the power of the conjugate variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatticeKind {
    /// `Y²/2M + V(X)`: second-difference kinetic stencil.
    Quadratic { mass: f64 },
    /// `κY³ + V(X)`: antisymmetric imaginary stencil on offsets ±1, ±3.
    Cubic { kappa: f64 },
}

/// A discretized Hamiltonian on a [`Grid1D`], with the potential sampled on
/// the lattice.
#[derive(Debug, Clone)]
pub struct LatticeHamiltonian {
    pub grid: Grid1D,
    pub kind: LatticeKind,
    potential: Vec<f64>,
}

impl LatticeHamiltonian {
    pub fn new(grid: Grid1D, kind: LatticeKind, potential: impl Fn(f64) -> f64) -> Self {
        let potential = (0..grid.points)
            .map(|n| potential(grid.position(n)))
            .collect();
        LatticeHamiltonian {
            grid,
            kind,
            potential,
        }
    }

    /// Stencil bandwidth: 1 for quadratic, 3 for cubic.
    pub fn bandwidth(&self) -> usize {
        match self.kind {
            LatticeKind::Quadratic { .. } => 1,
            LatticeKind::Cubic { .. } => 3,
        }
    }

    /// Hamiltonian entry `⟨n|H|m⟩`.
    pub fn entry(&self, n: usize, m: usize) -> C64 {
        let eps = self.grid.spacing();
        match self.kind {
            LatticeKind::Quadratic { mass } => {
                let k = 1.0 / (2.0 * mass * eps * eps);
                if n == m {
                    C64::new(2.0 * k + self.potential[n], 0.0)
                } else if n.abs_diff(m) == 1 {
                    C64::new(-k, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            LatticeKind::Cubic { kappa } => {
                let k = kappa / (eps * eps * eps);
                if n == m {
                    C64::new(self.potential[n], 0.0)
                } else if m + 3 == n {
                    C64::new(0.0, k)
                } else if n + 3 == m {
                    C64::new(0.0, -k)
                } else if m + 1 == n {
                    C64::new(0.0, -3.0 * k)
                } else if n + 1 == m {
                    C64::new(0.0, 3.0 * k)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
        }
    }

    /// Materialize the dense operator (moderate lattice sizes only).
    pub fn to_operator(&self) -> Result<HermitianOperator> {
        let n = self.grid.points;
        let band = self.bandwidth();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(band)..(i + band + 1).min(n) {
                m.set(i, j, self.entry(i, j));
            }
        }
        HermitianOperator::new(m)
    }
}

/// Sample a wavefunction onto the lattice as a normalized amplitude
/// vector. Panics if the boundary density after normalization exceeds
/// 1e-10 (the lattice assumes hard truncation of a negligible tail).
pub fn lattice_state(grid: &Grid1D, psi: impl Fn(f64) -> C64) -> Vec<C64> {
    let raw: Vec<C64> = (0..grid.points).map(|n| psi(grid.position(n))).collect();
    let norm = crate::linalg::vnorm(&raw);
    assert!(norm > 0.0, "wavefunction vanishes on the entire lattice");
    let out: Vec<C64> = raw.iter().map(|c| c / norm).collect();
    let edge = out[0].norm_sqr().max(out[grid.points - 1].norm_sqr());
    assert!(
        edge < 1e-10,
        "boundary density {edge:.3e} too large; widen the lattice"
    );
    out
}

/// Probability current between lattice sites,
/// `J_nm = 2 Im[ψ̄_n ⟨n|H|m⟩ ψ_m]`. Banded by construction: only
/// `|n - m| ≤ 1` (quadratic) or `|n - m| ∈ {1, 3}` (cubic) entries are
/// nonzero.
pub fn lattice_current(psi: &[C64], hl: &LatticeHamiltonian) -> CurrentMatrix {
    assert_eq!(psi.len(), hl.grid.points);
    let band = hl.bandwidth();
    CurrentMatrix::from_upper(psi.len(), |n, m| {
        if m - n > band {
            0.0
        } else {
            2.0 * (psi[n].conj() * hl.entry(n, m) * psi[m]).im
        }
    })
}

/// Current into site `target` from site `source`, computed locally.
fn local_current(psi: &[C64], hl: &LatticeHamiltonian, target: usize, source: usize) -> f64 {
    2.0 * (psi[target].conj() * hl.entry(target, source) * psi[source]).im
}

/// Lattice-site jump moments per unit time at a probe site, computed from
/// the Bell rates: `E[dx]/dt = Σ_m (x_m - x_n) T_mn` and
/// `E[dx²]/dt = Σ_m (x_m - x_n)² T_mn`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuumDiagnostics {
    pub epsilon: f64,
    pub mean_rate: f64,
    pub dispersion_rate: f64,
}

/// Evaluate the jump moments at `probe`.
///
/// For the quadratic kind the rates come from the exact lattice current
/// divided by the Born weight of the probe site; the mean tends to the
/// velocity field and the dispersion is O(ε). For the cubic kind the
/// state dependence of the rates cancels at leading order in ε, leaving
/// the limiting pattern `T_(n+3)n = κ/ε³`, `T_(n-1)n = 3κ/ε³` (mirrored
/// for negative κ): the mean vanishes identically while ε·dispersion
/// stays pinned at 12κ, so no continuum limit exists.
pub fn continuum_diagnostics(
    psi: &[C64],
    hl: &LatticeHamiltonian,
    probe: usize,
) -> Result<ContinuumDiagnostics> {
    let eps = hl.grid.spacing();
    match hl.kind {
        LatticeKind::Quadratic { .. } => {
            assert_eq!(psi.len(), hl.grid.points);
            assert!(probe > 0 && probe + 1 < psi.len(), "probe in the interior");
            let p = psi[probe].norm_sqr();
            let mut t_up = 0.0;
            let mut t_down = 0.0;
            for (site, t) in [(probe + 1, &mut t_up), (probe - 1, &mut t_down)] {
                let j = local_current(psi, hl, site, probe);
                if j > 0.0 {
                    if p < tol::P_FLOOR {
                        return Err(ModalError::StarvedSource {
                            index: probe,
                            current: j,
                            prob: p,
                        });
                    }
                    *t = j / p;
                }
            }
            Ok(ContinuumDiagnostics {
                epsilon: eps,
                mean_rate: eps * (t_up - t_down),
                dispersion_rate: eps * eps * (t_up + t_down),
            })
        }
        LatticeKind::Cubic { kappa } => {
            // Limiting rates: hops of +3ε at |κ|/ε³ and -1ε at 3|κ|/ε³
            // (signs mirrored for κ < 0). Integer offset bookkeeping keeps
            // the exact cancellation of the mean.
            let rate_unit = kappa.abs() / (eps * eps * eps);
            let (far, near) = if kappa >= 0.0 { (3i64, -1i64) } else { (-3, 1) };
            // One hop channel at the far offset, three at the near one.
            let (far_mult, near_mult) = (1i64, 3i64);
            let mean_steps = far * far_mult + near * near_mult;
            let disp_steps = far * far * far_mult + near * near * near_mult;
            Ok(ContinuumDiagnostics {
                epsilon: eps,
                mean_rate: mean_steps as f64 * eps * rate_unit,
                dispersion_rate: disp_steps as f64 * eps * eps * rate_unit,
            })
        }
    }
}

/// Velocity operator `v̂ = -i[X, H]`. Hermitian whenever `H` is at most
/// quadratic in the variable conjugate to `X`.
pub fn velocity_operator(x: &HermitianOperator, h: &HermitianOperator) -> CMatrix {
    let xh = x.matrix().matmul(h.matrix());
    let hx = h.matrix().matmul(x.matrix());
    xh.sub(&hx).scale(C64::new(0.0, -1.0))
}

/// `⟨x|Ψ⟩` from Fock coefficients.
pub fn position_wavefunction(coeffs: &[C64], x: f64) -> C64 {
    let phi = position_amplitudes(x, coeffs.len());
    coeffs.iter().zip(&phi).map(|(c, &p)| c * p).sum()
}

/// `∂_x ⟨x|Ψ⟩` from Fock coefficients.
pub fn position_wavefunction_deriv(coeffs: &[C64], x: f64) -> C64 {
    let dphi = position_amplitude_derivatives(x, coeffs.len());
    coeffs.iter().zip(&dphi).map(|(c, &p)| c * p).sum()
}

/// Velocity field sampled on a grid.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

/// `v(x) = Re[⟨Ψ|x⟩⟨x|v̂|Ψ⟩] / |⟨x|Ψ⟩|²` on the grid points.
pub fn velocity_field(state: &PureState, grid: &Grid1D, v_op: &CMatrix) -> Result<VelocityField> {
    let vpsi = v_op.matvec(state.amplitudes());
    let values = (0..grid.points)
        .map(|n| {
            let x = grid.position(n);
            velocity_at(state.amplitudes(), &vpsi, x, 0.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(VelocityField {
        grid: *grid,
        values,
    })
}

fn velocity_at(coeffs: &[C64], vpsi: &[C64], x: f64, t: f64) -> Result<f64> {
    let a = position_wavefunction(coeffs, x);
    let density = a.norm_sqr();
    if density < tol::DENSITY_FLOOR {
        return Err(ModalError::Node { x, t, density });
    }
    let b = position_wavefunction(vpsi, x);
    Ok((a.conj() * b).re / density)
}

/// Momentum field `y(x) = Im[⟨Ψ|x⟩ ∂_x⟨x|Ψ⟩] / |⟨x|Ψ⟩|²`.
pub fn momentum_field(state: &PureState, x: f64) -> Result<f64> {
    let a = position_wavefunction(state.amplitudes(), x);
    let density = a.norm_sqr();
    if density < tol::DENSITY_FLOOR {
        return Err(ModalError::Node { x, t: 0.0, density });
    }
    let da = position_wavefunction_deriv(state.amplitudes(), x);
    Ok((a.conj() * da).im / density)
}

/// Time-dependent field provider for a Fock-diagonal Hamiltonian: the
/// coefficients rotate as `c_m(t) = c_m(0) e^{-iE_m t}` and fields are
/// evaluated through the velocity operator.
#[derive(Debug, Clone)]
pub struct FockFieldProvider {
    coeffs0: Vec<C64>,
    energies: Vec<f64>,
    v_op: CMatrix,
}

impl FockFieldProvider {
    /// Oscillator provider: `H = ω a†a`, `v̂ = -i[X, H] = ωY`.
    pub fn oscillator(state: &PureState, omega: f64) -> Self {
        let dim = state.dim();
        let x = crate::hilbert::position_operator(dim);
        let h = crate::hilbert::harmonic_hamiltonian(omega, dim);
        FockFieldProvider {
            coeffs0: state.amplitudes().to_vec(),
            energies: (0..dim).map(|m| omega * m as f64).collect(),
            v_op: velocity_operator(&x, &h),
        }
    }

    pub fn coeffs_at(&self, t: f64) -> Vec<C64> {
        self.coeffs0
            .iter()
            .zip(&self.energies)
            .map(|(c, &e)| c * C64::from_polar(1.0, -e * t))
            .collect()
    }

    pub fn velocity(&self, t: f64, x: f64) -> Result<f64> {
        let coeffs = self.coeffs_at(t);
        let vpsi = self.v_op.matvec(&coeffs);
        velocity_at(&coeffs, &vpsi, x, t)
    }

    pub fn momentum(&self, t: f64, x: f64) -> Result<f64> {
        let coeffs = self.coeffs_at(t);
        let a = position_wavefunction(&coeffs, x);
        let density = a.norm_sqr();
        if density < tol::DENSITY_FLOOR {
            return Err(ModalError::Node { x, t, density });
        }
        let da = position_wavefunction_deriv(&coeffs, x);
        Ok((a.conj() * da).im / density)
    }
}

/// A deterministic position trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory1D {
    pub path: OdePath<f64>,
}

impl Trajectory1D {
    pub fn sample(&self, t: f64) -> f64 {
        self.path.sample(t)
    }

    pub fn end_time(&self) -> f64 {
        self.path.end_time()
    }
}

/// Trajectory integration failure carrying the partial path.
#[derive(Debug)]
pub struct TrajectoryFailure {
    pub partial: Trajectory1D,
    pub error: ModalError,
}

/// Integrate `d_t x = v(x, t)` from `x0` with adaptive 4/5th-order steps;
/// a node encounter aborts with the partial trajectory attached.
pub fn integrate_trajectory(
    field: impl FnMut(f64, f64) -> Result<f64>,
    x0: f64,
    t_max: f64,
    opts: &OdeOptions,
) -> std::result::Result<Trajectory1D, Box<TrajectoryFailure>> {
    let mut field = field;
    match ode::integrate(|t, x: &f64| field(t, *x), 0.0, t_max, x0, opts) {
        Ok(path) => Ok(Trajectory1D { path }),
        Err(OdeFailure { partial, reason }) => {
            let error = match reason {
                OdeStop::Rhs(e) => e,
                OdeStop::StepUnderflow { t, .. } => ModalError::StepSize {
                    t,
                    rate: f64::NAN,
                    refinements: 0,
                },
                OdeStop::MaxSteps { t } => ModalError::StepSize {
                    t,
                    rate: f64::NAN,
                    refinements: 0,
                },
            };
            Err(Box::new(TrajectoryFailure {
                partial: Trajectory1D { path: partial },
                error,
            }))
        }
    }
}
