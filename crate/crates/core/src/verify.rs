//! Built-in verification suites: reduced-scale versions of the crate's
//! invariants, runnable from the command line to vet an installation.

use num_complex::Complex64 as C64;

use crate::bohm::{continuum_diagnostics, lattice_state, Grid1D, LatticeHamiltonian, LatticeKind};
use crate::hilbert::{
    born_probabilities, evolve_schrodinger, harmonic_hamiltonian, make_state, pauli_x, MeasureSet,
    PureState, RawVector, StateSpec,
};
use crate::jump::{
    bell_rates, master_equation_occupations, probability_current, simulate_ensemble,
    EnsembleOptions, JumpModel,
};
use crate::linalg::CMatrix;
use crate::naimark::{build_trine_extension, lift_guiding_state, verify_extension};
use crate::ode::OdeOptions;
use crate::oscillator::{closed_form, integrate_husimi, sample_husimi, ClosedFormKind};
use crate::rng::{derive_rng, standard_normal};
use crate::tol;

/// Outcome of one verification suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteReport {
    fn check(name: &'static str, passed: bool, detail: String) -> Self {
        SuiteReport {
            name,
            passed,
            detail,
        }
    }
}

/// Run every module suite at reduced scale. Deterministic in `seed`.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        hilbert_suite(seed),
        jump_suite(seed),
        naimark_suite(seed, None),
        bohm_suite(),
        oscillator_suite(seed),
    ]
}

/// Same as [`run_all`] but with an optional fault injected into the trine
/// fixture, for exercising failure reporting.
pub fn run_all_with_trine_fault(seed: u64, corrupt_trine: bool) -> Vec<SuiteReport> {
    vec![
        hilbert_suite(seed),
        jump_suite(seed),
        naimark_suite(seed, corrupt_trine.then_some(1.01)),
        bohm_suite(),
        oscillator_suite(seed),
    ]
}

fn random_state(dim: usize, seed: u64, stream: u64) -> PureState {
    let mut rng = derive_rng(seed, stream);
    let raw: Vec<C64> = (0..dim)
        .map(|_| C64::new(standard_normal(&mut rng), standard_normal(&mut rng)))
        .collect();
    RawVector(raw).normalized().unwrap()
}

fn random_hermitian(dim: usize, seed: u64, stream: u64) -> crate::hilbert::HermitianOperator {
    let mut rng = derive_rng(seed, stream);
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        m.set(i, i, C64::new(standard_normal(&mut rng), 0.0));
        for j in (i + 1)..dim {
            let v = C64::new(standard_normal(&mut rng), standard_normal(&mut rng));
            m.set(i, j, v);
            m.set(j, i, v.conj());
        }
    }
    crate::hilbert::HermitianOperator::new(m).unwrap()
}

fn random_basis_measure(dim: usize, seed: u64, stream: u64) -> MeasureSet {
    let h = random_hermitian(dim, seed, stream);
    let eig = crate::linalg::eigh(h.matrix()).unwrap();
    MeasureSet::from_orthonormal_columns(
        eig.vectors,
        (0..dim).map(|k| C64::new(k as f64, 0.0)).collect(),
    )
    .unwrap()
}

fn hilbert_suite(seed: u64) -> SuiteReport {
    let mut worst_total = 0.0f64;
    for m_stream in 0..4u64 {
        let m = random_basis_measure(5, seed ^ 0x11, m_stream);
        for s_stream in 0..25u64 {
            let s = random_state(5, seed ^ 0x12, 100 * m_stream + s_stream);
            let p = born_probabilities(&s, &m).unwrap();
            worst_total = worst_total.max((p.iter().sum::<f64>() - 1.0).abs());
        }
    }
    let h = random_hermitian(4, seed ^ 0x13, 0);
    let s = random_state(4, seed ^ 0x14, 0);
    let once = evolve_schrodinger(&s, &h, 0.9).unwrap();
    let twice = evolve_schrodinger(&evolve_schrodinger(&s, &h, 0.4).unwrap(), &h, 0.5).unwrap();
    let group = once
        .amplitudes()
        .iter()
        .zip(twice.amplitudes())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max);
    let passed = worst_total < tol::COMPLETENESS_TOL && group < 1e-10;
    SuiteReport::check(
        "hilbert",
        passed,
        format!("born residual {worst_total:.2e}, group residual {group:.2e}"),
    )
}

fn jump_suite(seed: u64) -> SuiteReport {
    // Antisymmetry and Bell exclusivity on random models.
    let dim = 5;
    let mut worst_asym = 0.0f64;
    let mut exclusivity_ok = true;
    for stream in 0..10u64 {
        let h = random_hermitian(dim, seed ^ 0x21, stream);
        let s = random_state(dim, seed ^ 0x22, stream);
        let m = random_basis_measure(dim, seed ^ 0x23, stream);
        let j = probability_current(&s, &m, &h, None).unwrap();
        for a in 0..dim {
            for b in 0..dim {
                worst_asym = worst_asym.max((j.get(a, b) + j.get(b, a)).abs());
            }
        }
        let p = born_probabilities(&s, &m).unwrap();
        let p: Vec<f64> = p.iter().map(|x| x.max(1e-6)).collect();
        let t = bell_rates(&j, &p).unwrap();
        for a in 0..dim {
            for b in 0..dim {
                if t.get(a, b) < 0.0 || t.get(a, b) * t.get(b, a) != 0.0 {
                    exclusivity_ok = false;
                }
            }
        }
    }

    // Short Rabi ensemble against the integrated master equation.
    let model = JumpModel::new(
        pauli_x(),
        MeasureSet::from_orthonormal_columns(
            CMatrix::identity(2),
            vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
        )
        .unwrap(),
        PureState::basis(2, 0),
    )
    .unwrap();
    let count = 4000;
    let opts = EnsembleOptions {
        sample_stride: 200,
        ..Default::default()
    };
    let (stats, _) = simulate_ensemble(&model, 1.0, 1e-3, count, seed ^ 0x24, &opts).unwrap();
    let me = master_equation_occupations(&model, &stats.sample_times).unwrap();
    let mut ensemble_ok = true;
    for (k, row) in stats.frequencies.iter().enumerate() {
        for n in 0..2 {
            let bound =
                4.0 * (me[k][n] * (1.0 - me[k][n]) / count as f64).sqrt() + 3.0 / count as f64;
            if (row[n] - me[k][n]).abs() > bound {
                ensemble_ok = false;
            }
        }
    }

    let passed = worst_asym == 0.0 && exclusivity_ok && ensemble_ok;
    SuiteReport::check(
        "jump",
        passed,
        format!(
            "antisymmetry {worst_asym:.2e}, exclusivity {exclusivity_ok}, ensemble-vs-master {ensemble_ok}"
        ),
    )
}

fn naimark_suite(seed: u64, corruption: Option<f64>) -> SuiteReport {
    let mut trine = build_trine_extension();
    if let Some(factor) = corruption {
        let mut elements: Vec<CMatrix> = (0..4)
            .map(|n| trine.extension.projectors.element(n))
            .collect();
        elements[0] = elements[0].scale(C64::new(factor, 0.0));
        trine.extension.projectors =
            MeasureSet::projective(elements, trine.extension.projectors.values().to_vec()).unwrap();
    }
    let report = verify_extension(&trine.pom, &trine.extension, 300, seed ^ 0x31).unwrap();
    let phi = lift_guiding_state(&trine.states[0], &trine.extension).unwrap();
    let p = born_probabilities(&phi, &trine.extension.projectors).unwrap();
    let lifted_ok = (p[0] - 2.0 / 3.0).abs() < 1e-12
        && (p[1] - 1.0 / 6.0).abs() < 1e-12
        && (p[2] - 1.0 / 6.0).abs() < 1e-12
        && p[3] < 1e-12;
    let passed = report.passes(tol::DILATION_TOL) && lifted_ok;
    SuiteReport::check(
        "naimark",
        passed,
        format!(
            "dilation {:.2e}, completeness {:.2e}, orthogonality {:.2e}, lifted probs {}",
            report.max_deviation,
            report.completeness_residual,
            report.orthogonality_residual,
            lifted_ok
        ),
    )
}

fn bohm_suite() -> SuiteReport {
    // Quadratic: the dispersion rate scales linearly with ε.
    let k_phase = 0.6;
    let mut disps = Vec::new();
    for points in [201usize, 401, 801] {
        let grid = Grid1D::new(-8.0, 8.0, points);
        let hl = LatticeHamiltonian::new(grid, LatticeKind::Quadratic { mass: 1.0 }, |_| 0.0);
        let psi = lattice_state(&grid, |x| {
            C64::from_polar((-x * x / 2.0).exp(), k_phase * x)
        });
        let d = continuum_diagnostics(&psi, &hl, grid.nearest_index(0.0)).unwrap();
        disps.push((d.epsilon, d.dispersion_rate));
    }
    let slope = (disps[2].1 / disps[0].1).ln() / (disps[2].0 / disps[0].0).ln();
    let quadratic_ok = (slope - 1.0).abs() < 0.1;

    // Cubic: ε·dispersion pinned at 12κ, mean exactly zero.
    let kappa = 0.5;
    let grid = Grid1D::new(-5.0, 5.0, 201);
    let hl = LatticeHamiltonian::new(grid, LatticeKind::Cubic { kappa }, |_| 0.0);
    let psi = lattice_state(&grid, |x| C64::new((-x * x / 2.0).exp(), 0.0));
    let d = continuum_diagnostics(&psi, &hl, 100).unwrap();
    let cubic_ok = d.mean_rate == 0.0
        && (d.epsilon * d.dispersion_rate - 12.0 * kappa).abs() < 0.01 * 12.0 * kappa;

    let passed = quadratic_ok && cubic_ok;
    SuiteReport::check(
        "bohm",
        passed,
        format!("quadratic slope {slope:.3}, cubic pinned {cubic_ok}"),
    )
}

fn oscillator_suite(seed: u64) -> SuiteReport {
    let omega = 1.0;
    // Numeric Husimi trajectory against the closed form for fock(1).
    let f1 = make_state(&StateSpec::Fock(1), 4).unwrap();
    let alpha0 = C64::new(1.0, 0.0);
    let traj = integrate_husimi(
        omega,
        &f1,
        alpha0,
        10.0,
        101,
        &OdeOptions::for_frequency(omega),
    )
    .unwrap();
    let mut worst = 0.0f64;
    for (t, a) in traj.times.iter().zip(&traj.alphas) {
        let expect = closed_form(ClosedFormKind::HusimiFock { n: 1 }, omega, alpha0, *t).unwrap();
        worst = worst.max((a - expect).norm());
    }
    let trajectory_ok = worst < tol::ODE_MATCH_TOL;

    // Sampler mean |α|² = n + 1.
    let n = 2;
    let state = make_state(&StateSpec::Fock(n), 6).unwrap();
    let samples = sample_husimi(&state, 20_000, seed ^ 0x41).unwrap();
    let mean_r2 = samples.iter().map(|a| a.norm_sqr()).sum::<f64>() / samples.len() as f64;
    let sigma = ((n as f64 + 1.0) / samples.len() as f64).sqrt();
    let sampler_ok = (mean_r2 - (n as f64 + 1.0)).abs() < 5.0 * sigma;

    // Guiding energy conserved.
    let h = harmonic_hamiltonian(omega, 30);
    let coh = make_state(&StateSpec::Coherent(C64::new(1.0, 0.5)), 30).unwrap();
    let prop = crate::hilbert::Propagator::new(&h).unwrap();
    let e0 = h.expectation(&coh);
    let e1 = h.expectation(&prop.evolve(&coh, 7.7).unwrap());
    let energy_ok = (e1 - e0).abs() < 1e-10;

    let passed = trajectory_ok && sampler_ok && energy_ok;
    SuiteReport::check(
        "oscillator",
        passed,
        format!(
            "closed-form residual {worst:.2e}, sampler mean {mean_r2:.3}, energy drift {:.2e}",
            (e1 - e0).abs()
        ),
    )
}
