//! The worked model: a 1-D harmonic oscillator under the Husimi
//! (coherent-state) measure on an enlarged space and under the position
//! measure, with closed-form reference trajectories and classical-limit
//! reports.
//!
//! The Husimi beable is a phase-space point α = x⁺ + iy⁻ obeying
//! `d_t α = -(iω/2)(α + χ_ψ)`, where χ_ψ is a ratio of Fock-series
//! evaluated at ᾱ. Number states give χ = n/ᾱ and uniform rotation at
//! ω' = ω(1 + n/|α|²)/2; coherent states give χ = βe^{-iωt}.

use num_complex::Complex64 as C64;
use rand::RngExt;

use crate::bohm::{position_wavefunction, FockFieldProvider};
use crate::error::{ModalError, Result};
use crate::hilbert::{
    annihilation, harmonic_hamiltonian, make_state, tensor_operators, HermitianOperator, PureState,
    StateSpec,
};
use crate::linalg::CMatrix;
use crate::ode::{self, OdeFailure, OdeOptions, OdeStop};
use crate::rng::{derive_rng, standard_normal};
use crate::tol;

/// A phase-space point `α = x⁺ + iy⁻`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub alpha: C64,
}

impl PhasePoint {
    pub fn new(alpha: C64) -> Self {
        PhasePoint { alpha }
    }

    pub fn x_plus(&self) -> f64 {
        self.alpha.re
    }

    pub fn y_minus(&self) -> f64 {
        self.alpha.im
    }
}

/// Which measure drives the oscillator scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillatorMeasure {
    HusimiPom,
    PositionProjective,
    Classical,
}

/// A complete oscillator experiment description.
#[derive(Debug, Clone)]
pub struct OscillatorScenario {
    pub omega: f64,
    pub initial: StateSpec,
    pub measure: OscillatorMeasure,
    pub truncation: usize,
    pub t_max: f64,
    pub samples: usize,
    pub seed: u64,
}

impl OscillatorScenario {
    pub fn initial_state(&self) -> Result<PureState> {
        make_state(&self.initial, self.truncation)
    }
}

/// Origin of a trajectory's values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectorySource {
    Numeric,
    ClosedForm,
    Classical,
}

impl TrajectorySource {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrajectorySource::Numeric => "numeric",
            TrajectorySource::ClosedForm => "closed_form",
            TrajectorySource::Classical => "classical",
        }
    }
}

/// Time-stamped phase-space samples.
#[derive(Debug, Clone)]
pub struct PhaseTrajectory {
    pub times: Vec<f64>,
    pub alphas: Vec<C64>,
    pub source: TrajectorySource,
}

/// The drift ratio `χ_ψ(ᾱ)`: numerator `Σ_m √m ᾱ^{m-1} c_m/√(m-1)!`-style
/// series over denominator `Σ_m ᾱ^m c_m/√m!`, both truncated with the
/// state. A denominator small relative to its term-magnitude sum marks a
/// genuine zero of the Husimi amplitude.
pub fn chi(alpha: C64, coeffs: &[C64]) -> Result<C64> {
    let abar = alpha.conj();
    let mut term = C64::new(1.0, 0.0); // ᾱ^m / √m!
    let mut den = C64::new(0.0, 0.0);
    let mut num = C64::new(0.0, 0.0);
    let mut mag = 0.0f64;
    for (m, c) in coeffs.iter().enumerate() {
        if m > 0 {
            // √m · ᾱ^{m-1}/√(m-1)!·(1/m)·... = √m · term_{m-1}
            num += c * term * (m as f64).sqrt();
            term *= abar / C64::new((m as f64).sqrt(), 0.0);
        }
        den += c * term;
        mag += (c * term).norm();
    }
    if den.norm() <= tol::CHI_REL_FLOOR * mag || mag == 0.0 {
        return Err(ModalError::HusimiZero {
            re: alpha.re,
            im: alpha.im,
        });
    }
    Ok(num / den)
}

/// Right-hand side of the phase-space flow:
/// `d_t α = -(iω/2) α - (iω/2) χ_ψ`.
pub fn husimi_rhs(alpha: C64, coeffs: &[C64], omega: f64) -> Result<C64> {
    let chi_val = chi(alpha, coeffs)?;
    Ok(C64::new(0.0, -omega / 2.0) * (alpha + chi_val))
}

/// Closed-form solutions for the five exactly solvable cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormKind {
    /// Husimi measure, `|Ψ(0)⟩ = |n⟩`: uniform rotation at
    /// `ω' = ω(1 + n/|α(0)|²)/2`. Needs `α(0) ≠ 0`.
    HusimiFock { n: usize },
    /// Husimi measure, `|Ψ(0)⟩ = |β⟩`:
    /// `α(t) = [α(0) - β] e^{-iωt/2} + β e^{-iωt}`.
    HusimiCoherent { beta: C64 },
    /// Position measure, `|Ψ(0)⟩ = |n⟩`: frozen at `α(0) = x(0)/√2`.
    PositionFock,
    /// Position measure, `|Ψ(0)⟩ = |β⟩`:
    /// `α(t) = β e^{-iωt} + (α(0) - β)`.
    PositionCoherent { beta: C64 },
    /// Classical oscillator: `α(t) = α(0) e^{-iωt}`.
    Classical,
}

pub fn closed_form(kind: ClosedFormKind, omega: f64, alpha0: C64, t: f64) -> Result<C64> {
    match kind {
        ClosedFormKind::HusimiFock { n } => {
            let r2 = alpha0.norm_sqr();
            if r2 == 0.0 {
                return Err(ModalError::HusimiZero {
                    re: alpha0.re,
                    im: alpha0.im,
                });
            }
            let omega_prime = omega * (1.0 + n as f64 / r2) / 2.0;
            Ok(alpha0 * C64::from_polar(1.0, -omega_prime * t))
        }
        ClosedFormKind::HusimiCoherent { beta } => Ok((alpha0 - beta)
            * C64::from_polar(1.0, -omega * t / 2.0)
            + beta * C64::from_polar(1.0, -omega * t)),
        ClosedFormKind::PositionFock => Ok(alpha0),
        ClosedFormKind::PositionCoherent { beta } => {
            Ok(beta * C64::from_polar(1.0, -omega * t) + (alpha0 - beta))
        }
        ClosedFormKind::Classical => Ok(alpha0 * C64::from_polar(1.0, -omega * t)),
    }
}

/// Failure carrying the partial trajectory up to the stopping point.
#[derive(Debug)]
pub struct PhaseTrajectoryFailure {
    pub partial: PhaseTrajectory,
    pub error: ModalError,
}

/// Integrate the Husimi phase-space flow for guiding state `psi0` (with
/// `H = ω a†a`) from `alpha0`, sampled on `n_out` uniform times.
pub fn integrate_husimi(
    omega: f64,
    psi0: &PureState,
    alpha0: C64,
    t_max: f64,
    n_out: usize,
    opts: &OdeOptions,
) -> std::result::Result<PhaseTrajectory, Box<PhaseTrajectoryFailure>> {
    let c0 = psi0.amplitudes().to_vec();
    let vacuum_weight = c0[0].norm() / c0.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let rhs = move |t: f64, alpha: &C64| -> Result<C64> {
        if alpha.norm() < 1e-8 && vacuum_weight < 1e-12 {
            // States with no vacuum amplitude have a drift singularity at
            // the origin.
            return Err(ModalError::HusimiZero {
                re: alpha.re,
                im: alpha.im,
            });
        }
        let coeffs: Vec<C64> = c0
            .iter()
            .enumerate()
            .map(|(m, c)| c * C64::from_polar(1.0, -omega * m as f64 * t))
            .collect();
        husimi_rhs(*alpha, &coeffs, omega)
    };
    #[allow(clippy::type_complexity)]
    let sample_grid = |path: &ode::OdePath<C64>, upto: f64| -> (Vec<f64>, Vec<C64>) {
        let times: Vec<f64> = (0..n_out)
            .map(|k| t_max * k as f64 / (n_out - 1).max(1) as f64)
            .filter(|&t| t <= upto + 1e-12)
            .collect();
        let alphas = times.iter().map(|&t| path.sample(t)).collect();
        (times, alphas)
    };
    match ode::integrate(rhs, 0.0, t_max, alpha0, opts) {
        Ok(path) => {
            let (times, alphas) = sample_grid(&path, t_max);
            Ok(PhaseTrajectory {
                times,
                alphas,
                source: TrajectorySource::Numeric,
            })
        }
        Err(OdeFailure { partial, reason }) => {
            let error = match reason {
                OdeStop::Rhs(e) => e,
                OdeStop::StepUnderflow { t, .. } | OdeStop::MaxSteps { t } => {
                    ModalError::StepSize {
                        t,
                        rate: f64::NAN,
                        refinements: 0,
                    }
                }
            };
            let upto = partial.end_time();
            let (times, alphas) = sample_grid(&partial, upto);
            Err(Box::new(PhaseTrajectoryFailure {
                partial: PhaseTrajectory {
                    times,
                    alphas,
                    source: TrajectorySource::Numeric,
                },
                error,
            }))
        }
    }
}

/// Joint eigenvalue amplitude of the lifted guiding state,
/// `⟨x⁺,y⁻|Ψ ⊗ 0⟩ = e^{-(x⁺²+y⁻²)/2}/√π · Σ_m ᾱ^m c_m/√m!`.
pub fn husimi_amplitude(x_plus: f64, y_minus: f64, coeffs: &[C64]) -> C64 {
    let abar = C64::new(x_plus, -y_minus);
    let mut term = C64::new(1.0, 0.0);
    let mut series = C64::new(0.0, 0.0);
    for (m, c) in coeffs.iter().enumerate() {
        if m > 0 {
            term *= abar / C64::new((m as f64).sqrt(), 0.0);
        }
        series += c * term;
    }
    let prefactor =
        (-(x_plus * x_plus + y_minus * y_minus) / 2.0).exp() / std::f64::consts::PI.sqrt();
    series * prefactor
}

/// Initial conditions drawn from a scenario's Born density.
#[derive(Debug, Clone)]
pub enum InitialSamples {
    /// Phase-space points from the Husimi density of the lifted state.
    Phase(Vec<C64>),
    /// Positions from the position density of the guiding state.
    Position(Vec<f64>),
}

/// Sample initial conditions for an oscillator scenario, reproducibly
/// from its seed: rejection sampling against a moment-matched Gaussian
/// envelope (Husimi) or inverse-CDF on a fine grid (position). The
/// classical scenario shares the Husimi density.
pub fn sample_initial(
    scenario: &OscillatorScenario,
    count: usize,
    seed: u64,
) -> Result<InitialSamples> {
    let state = scenario.initial_state()?;
    match scenario.measure {
        OscillatorMeasure::HusimiPom | OscillatorMeasure::Classical => {
            Ok(InitialSamples::Phase(sample_husimi(&state, count, seed)?))
        }
        OscillatorMeasure::PositionProjective => Ok(InitialSamples::Position(sample_position(
            &state, count, seed,
        )?)),
    }
}

/// Rejection-sample the Husimi density `|⟨x⁺,y⁻|Ψ ⊗ 0⟩|²`.
pub fn sample_husimi(state: &PureState, count: usize, seed: u64) -> Result<Vec<C64>> {
    let coeffs = state.amplitudes();
    let mean_a = expectation_a(coeffs);
    let nbar = coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| m as f64 * c.norm_sqr())
        .sum::<f64>();
    // Husimi moments: E[α] = ⟨a⟩, E[|α - ⟨a⟩|²] = n̄ + 1 - |⟨a⟩|².
    let var = ((nbar + 1.0 - mean_a.norm_sqr()) / 2.0).max(0.25) * 1.5;

    // Bound the density/envelope ratio on a grid wide enough to cover the
    // support of both.
    let density = |a: C64| -> f64 { husimi_amplitude(a.re, a.im, coeffs).norm_sqr() };
    let envelope = |a: C64| -> f64 {
        let d2 = (a - mean_a).norm_sqr();
        (-d2 / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var)
    };
    let half_width = 6.5 * var.sqrt();
    let scan = 161;
    let mut bound = 0.0f64;
    for i in 0..scan {
        for j in 0..scan {
            let a = mean_a
                + C64::new(
                    -half_width + 2.0 * half_width * i as f64 / (scan - 1) as f64,
                    -half_width + 2.0 * half_width * j as f64 / (scan - 1) as f64,
                );
            let e = envelope(a);
            if e > 0.0 {
                bound = bound.max(density(a) / e);
            }
        }
    }
    let bound = bound * 1.25;

    let mut rng = derive_rng(seed, 0x48_75);
    let mut out = Vec::with_capacity(count);
    let mut draws = 0u64;
    while out.len() < count {
        draws += 1;
        let a = mean_a
            + C64::new(
                var.sqrt() * standard_normal(&mut rng),
                var.sqrt() * standard_normal(&mut rng),
            );
        let u: f64 = rng.random();
        if u * bound * envelope(a) <= density(a) {
            out.push(a);
        }
        if draws >= 1000 && (out.len() as f64) < 0.01 * draws as f64 {
            return Err(ModalError::Envelope {
                acceptance: out.len() as f64 / draws as f64,
                draws,
            });
        }
    }
    Ok(out)
}

/// Inverse-CDF sampling of the position density `|⟨x|Ψ⟩|²` on a fine grid.
pub fn sample_position(state: &PureState, count: usize, seed: u64) -> Result<Vec<f64>> {
    let coeffs = state.amplitudes();
    let nbar = coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| m as f64 * c.norm_sqr())
        .sum::<f64>();
    let half_width = (2.0 * (nbar + 1.0)).sqrt() + 6.0;
    let points = 4001;
    let xs: Vec<f64> = (0..points)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64)
        .collect();
    let dens: Vec<f64> = xs
        .iter()
        .map(|&x| position_wavefunction(coeffs, x).norm_sqr())
        .collect();
    // Cumulative trapezoid.
    let mut cum = vec![0.0f64; points];
    for i in 1..points {
        cum[i] = cum[i - 1] + 0.5 * (dens[i - 1] + dens[i]) * (xs[i] - xs[i - 1]);
    }
    let total = cum[points - 1];
    assert!(total > 0.0);
    let mut rng = derive_rng(seed, 0x50_4f);
    let samples = (0..count)
        .map(|_| {
            let target: f64 = rng.random::<f64>() * total;
            let idx = match cum.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
                Ok(i) => i,
                Err(i) => i.clamp(1, points - 1),
            };
            let (c0, c1) = (cum[idx - 1], cum[idx]);
            let frac = if c1 > c0 {
                (target - c0) / (c1 - c0)
            } else {
                0.5
            };
            xs[idx - 1] + frac * (xs[idx] - xs[idx - 1])
        })
        .collect();
    Ok(samples)
}

fn expectation_a(coeffs: &[C64]) -> C64 {
    coeffs
        .windows(2)
        .enumerate()
        .map(|(m, w)| w[0].conj() * w[1] * C64::new(((m + 1) as f64).sqrt(), 0.0))
        .sum()
}

/// The four quadratures and the lifted Hamiltonian on `uni ⊗ aux`.
#[derive(Debug, Clone)]
pub struct EnlargedOperators {
    pub x_plus: CMatrix,
    pub x_minus: CMatrix,
    pub y_plus: CMatrix,
    pub y_minus: CMatrix,
    /// `H_uni ⊗ 1_aux` for `H_uni = ω a†a`.
    pub h_ext: CMatrix,
    pub uni_dim: usize,
    pub aux_dim: usize,
}

/// Build `x̂± = (a + a† ± b ± b†)/2` and `ŷ± = (-ia + ia† ∓ ib ± ib†)/2`
/// on the enlarged space, plus the lifted Hamiltonian.
pub fn enlarged_space_operators(uni_dim: usize, aux_dim: usize, omega: f64) -> EnlargedOperators {
    let a = annihilation(uni_dim).kron(&CMatrix::identity(aux_dim));
    let b = CMatrix::identity(uni_dim).kron(&annihilation(aux_dim));
    let adag = a.dagger();
    let bdag = b.dagger();
    let half = C64::new(0.5, 0.0);
    let i_half = C64::new(0.0, 0.5);
    let x_plus = a.add(&adag).add(&b).add(&bdag).scale(half);
    let x_minus = a.add(&adag).sub(&b).sub(&bdag).scale(half);
    let y_plus = adag.sub(&a).add(&bdag.sub(&b)).scale(i_half);
    let y_minus = adag.sub(&a).sub(&bdag.sub(&b)).scale(i_half);
    let h_ext = tensor_operators(
        &harmonic_hamiltonian(omega, uni_dim),
        &HermitianOperator::new(CMatrix::identity(aux_dim)).unwrap(),
    )
    .matrix()
    .clone();
    EnlargedOperators {
        x_plus,
        x_minus,
        y_plus,
        y_minus,
        h_ext,
        uni_dim,
        aux_dim,
    }
}

/// Normalized distances to the classical orbit for one scenario family
/// member.
#[derive(Debug, Clone)]
pub struct ClassicalLimitEntry {
    pub n: usize,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    pub samples: usize,
}

/// Classical-limit comparison for number states under both measures:
/// `D = max_t |α_modal(t) - α(0)e^{-iωt}| / |α(0)|` over sampled initial
/// conditions.
#[derive(Debug, Clone)]
pub struct ClassicalLimitReport {
    pub husimi: Vec<ClassicalLimitEntry>,
    pub position: Vec<ClassicalLimitEntry>,
}

pub fn classical_limit_report(
    ns: &[usize],
    omega: f64,
    samples_per_n: usize,
    t_max: f64,
    seed: u64,
) -> Result<ClassicalLimitReport> {
    let grid: Vec<f64> = (0..256).map(|k| t_max * k as f64 / 255.0).collect();
    let mut husimi = Vec::new();
    let mut position = Vec::new();
    for (family_idx, &n) in ns.iter().enumerate() {
        let scenario_seed = seed.wrapping_add(family_idx as u64 * 7919);
        let truncation = n + 2;
        let state = make_state(&StateSpec::Fock(n), truncation)?;

        // Husimi side: numeric phase-space trajectories.
        let alphas = sample_husimi(&state, samples_per_n, scenario_seed)?;
        let mut distances = Vec::with_capacity(samples_per_n);
        for &alpha0 in &alphas {
            let traj = integrate_husimi(
                omega,
                &state,
                alpha0,
                t_max,
                grid.len(),
                &OdeOptions::for_frequency(omega),
            )
            .map_err(|f| f.error.clone())?;
            let d = traj
                .times
                .iter()
                .zip(&traj.alphas)
                .map(|(&t, &a)| {
                    let classical = alpha0 * C64::from_polar(1.0, -omega * t);
                    (a - classical).norm()
                })
                .fold(0.0f64, f64::max)
                / alpha0.norm();
            distances.push(d);
        }
        husimi.push(summarize(n, distances));

        // Position side: Bohmian trajectories (identically frozen for
        // number states).
        let xs = sample_position(&state, samples_per_n, scenario_seed ^ 0x5a5a)?;
        let provider = FockFieldProvider::oscillator(&state, omega);
        let mut distances = Vec::with_capacity(samples_per_n);
        for &x0 in &xs {
            if x0.abs() < 1e-9 {
                continue;
            }
            let traj = crate::bohm::integrate_trajectory(
                |t, x| provider.velocity(t, x),
                x0,
                t_max,
                &OdeOptions::default(),
            )
            .map_err(|f| f.error.clone())?;
            let alpha0 = C64::new(x0 / 2f64.sqrt(), 0.0);
            let d = grid
                .iter()
                .map(|&t| {
                    let x = traj.sample(t);
                    let y = provider.momentum(t, x).unwrap_or(0.0);
                    let modal = C64::new(x, y) / C64::new(2f64.sqrt(), 0.0);
                    let classical = alpha0 * C64::from_polar(1.0, -omega * t);
                    (modal - classical).norm()
                })
                .fold(0.0f64, f64::max)
                / alpha0.norm();
            distances.push(d);
        }
        position.push(summarize(n, distances));
    }
    Ok(ClassicalLimitReport { husimi, position })
}

fn summarize(n: usize, mut distances: Vec<f64>) -> ClassicalLimitEntry {
    distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |f: f64| -> f64 {
        let idx = ((distances.len() - 1) as f64 * f).round() as usize;
        distances[idx]
    };
    ClassicalLimitEntry {
        n,
        median: q(0.5),
        lower_quartile: q(0.25),
        upper_quartile: q(0.75),
        samples: distances.len(),
    }
}
