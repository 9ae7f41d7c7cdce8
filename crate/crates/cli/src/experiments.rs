//! Experiment implementations: bind the library modules to config
//! parameters, write CSV/JSON outputs, and record embedded checks.

use std::fmt::Write as _;
use std::path::Path;

use modalflow_core::bohm::{
    continuum_diagnostics, lattice_state, FockFieldProvider, Grid1D, LatticeHamiltonian,
    LatticeKind,
};
use modalflow_core::hilbert::{
    make_state, pauli_x, HermitianOperator, MeasureSet, PureState, StateSpec,
};
use modalflow_core::jump::{
    master_equation_occupations, simulate_ensemble, EnsembleOptions, EnsembleStats, JumpModel,
    JumpTrajectory,
};
use modalflow_core::linalg::CMatrix;
use modalflow_core::naimark::{build_trine_extension, lift_guiding_state};
use modalflow_core::ode::OdeOptions;
use modalflow_core::oscillator::{
    classical_limit_report, closed_form, integrate_husimi, ClosedFormKind, TrajectorySource,
};
use modalflow_core::{ModalError, C64};

use crate::config::{Experiment, RunConfig};
use crate::manifest::CheckResult;

pub struct ExperimentOutput {
    pub outputs: Vec<String>,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Numeric(ModalError),
    Io(std::io::Error),
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<ModalError> for RunError {
    fn from(e: ModalError) -> Self {
        match e {
            ModalError::Dimension { .. }
            | ModalError::Truncation { .. }
            | ModalError::MeasureKind
            | ModalError::UnsupportedScenario(_)
            | ModalError::MeasureInvariant(_) => RunError::Config(e.to_string()),
            other => RunError::Numeric(other),
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<String, RunError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(name.to_string())
}

fn ensemble_csv(stats: &EnsembleStats) -> String {
    let mut out = String::from("t,outcome,frequency,halfwidth\n");
    for (k, t) in stats.sample_times.iter().enumerate() {
        for (n, (f, h)) in stats.frequencies[k]
            .iter()
            .zip(&stats.halfwidths[k])
            .enumerate()
        {
            let _ = writeln!(out, "{t},{n},{f},{h}");
        }
    }
    out
}

fn trajectory_csv(traj: &JumpTrajectory) -> String {
    let mut out = String::from("t,index,value_re,value_im\n");
    for ((t, idx), v) in traj.times.iter().zip(&traj.indices).zip(&traj.values) {
        let _ = writeln!(out, "{t},{idx},{},{}", v.re, v.im);
    }
    out
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutput, RunError> {
    let dir = config.output_dir.clone();
    match config.experiment {
        Experiment::TrineStatic => trine_static(config, &dir),
        Experiment::JumpGeneric => jump_generic(config, &dir),
        Experiment::BohmTrajectory => bohm_trajectory(config, &dir),
        Experiment::ContinuumSweep => continuum_sweep(config, &dir),
        Experiment::HusimiOscillator => husimi_oscillator(config, &dir),
        Experiment::BohmOscillator => bohm_oscillator(config, &dir),
        Experiment::ClassicalLimit => classical_limit(config, &dir),
        Experiment::VerifyAll => verify_all(config, &dir),
    }
}

fn trine_static(config: &RunConfig, dir: &Path) -> Result<ExperimentOutput, RunError> {
    let p = &config.params;
    let trine = build_trine_extension();
    let phi0 = lift_guiding_state(&trine.states[0], &trine.extension)?;
    let model = JumpModel::new(
        HermitianOperator::zero(4),
        trine.extension.projectors.clone(),
        phi0,
    )?;
    let opts = EnsembleOptions {
        sample_stride: ((1.0 / p.dt) as usize / 8).max(1),
        record_trajectories: p.samples.min(8),
        ..Default::default()
    };
    let (stats, trajs) =
        simulate_ensemble(&model, p.t_max.min(1.0), p.dt, p.count, config.seed, &opts)?;

    let mut outputs = vec![write_file(dir, "ensemble.csv", &ensemble_csv(&stats))?];
    for traj in &trajs {
        outputs.push(write_file(
            dir,
            &format!("trajectory_{}.csv", traj.trajectory_id),
            &trajectory_csv(traj),
        )?);
    }

    let expected = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
    let last = stats.frequencies.last().unwrap();
    let mut ok = last[3] == 0.0;
    for (n, &e) in expected.iter().enumerate() {
        let half = 4.0 * (e * (1.0 - e) / p.count as f64).sqrt();
        ok &= (last[n] - e).abs() <= half;
    }
    let checks = vec![check(
        "trine_frequencies",
        ok,
        format!("final frequencies {last:?} vs (2/3, 1/6, 1/6, 0) within 4σ"),
    )];
    Ok(ExperimentOutput { outputs, checks })
}

fn jump_generic(config: &RunConfig, dir: &Path) -> Result<ExperimentOutput, RunError> {
    let p = &config.params;
    let h = HermitianOperator::new(pauli_x().matrix().scale(C64::new(p.omega, 0.0)))?;
    let measure = MeasureSet::from_orthonormal_columns(
        CMatrix::identity(2),
        vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
    )?;
    let model = JumpModel::new(h, measure, PureState::basis(2, 0))?;
    let steps = (p.t_max / p.dt).ceil() as usize;
    let opts = EnsembleOptions {
        sample_stride: (steps / 30).max(1),
        record_trajectories: p.samples.min(8),
        ..Default::default()
    };
    let (stats, trajs) = simulate_ensemble(&model, p.t_max, p.dt, p.count, config.seed, &opts)?;
    let me = master_equation_occupations(&model, &stats.sample_times)?;

    let mut outputs = vec![write_file(dir, "ensemble.csv", &ensemble_csv(&stats))?];
    let mut master = String::from("t,outcome,probability\n");
    for (k, t) in stats.sample_times.iter().enumerate() {
        for (n, q) in me[k].iter().enumerate() {
            let _ = writeln!(master, "{t},{n},{q}");
        }
    }
    outputs.push(write_file(dir, "master.csv", &master)?);
    for traj in &trajs {
        outputs.push(write_file(
            dir,
            &format!("trajectory_{}.csv", traj.trajectory_id),
            &trajectory_csv(traj),
        )?);
    }

    let mut worst = 0.0f64;
    let mut ok = true;
    for (k, row) in stats.frequencies.iter().enumerate() {
        for n in 0..row.len() {
            let bound =
                4.0 * (me[k][n] * (1.0 - me[k][n]) / p.count as f64).sqrt() + 3.0 / p.count as f64;
            let dev = (row[n] - me[k][n]).abs();
            worst = worst.max(dev - bound);
            ok &= dev <= bound;
        }
    }
    let checks = vec![check(
        "ensemble_vs_master_equation",
        ok,
        format!("worst deviation-minus-bound {worst:.3e} (≤ 0 passes)"),
    )];
    Ok(ExperimentOutput { outputs, checks })
}

fn initial_oscillator_state(
    p: &crate::config::Params,
) -> Result<(PureState, Option<usize>), RunError> {
    match p.n {
        Some(n) => Ok((make_state(&StateSpec::Fock(n), (n + 2).max(4))?, Some(n))),
        None => Ok((
            make_state(&StateSpec::Coherent(p.beta()), p.truncation)?,
            None,
        )),
    }
}

fn bohm_trajectory(config: &RunConfig, dir: &Path) -> Result<ExperimentOutput, RunError> {
    let p = &config.params;
    let (state, fock_n) = initial_oscillator_state(p)?;
    let provider = FockFieldProvider::oscillator(&state, p.omega);
    let x0 = p.x0.unwrap_or(2f64.sqrt() * p.alpha0_re);
    let traj = modalflow_core::bohm::integrate_trajectory(
        |t, x| provider.velocity(t, x),
        x0,
        p.t_max,
        &OdeOptions::for_frequency(p.omega),
    )
    .map_err(|f| RunError::from(f.error))?;

    let n_out = (p.t_max / p.dt).ceil() as usize;
    let mut csv = String::from("t,x\n");
    let mut worst = 0.0f64;
    for k in 0..=n_out {
        let t = p.t_max * k as f64 / n_out as f64;
        let x = traj.sample(t);
        let _ = writeln!(csv, "{t},{x}");
        match fock_n {
            Some(_) => worst = worst.max((x - x0).abs()),
            None => {
                let y0 = provider.momentum(0.0, x0).map_err(RunError::from)?;
                let alpha0 = C64::new(x0, y0) / C64::new(2f64.sqrt(), 0.0);
                let expect = closed_form(
                    ClosedFormKind::PositionCoherent { beta: p.beta() },
                    p.omega,
                    alpha0,
                    t,
                )?;
                worst = worst.max((x - 2f64.sqrt() * expect.re).abs());
            }
        }
    }
    let outputs = vec![write_file(dir, "trajectory.csv", &csv)?];
    let (name, tol, detail) = match fock_n {
        Some(n) => (
            "number_state_frozen",
            1e-10,
            format!("fock({n}) drift {worst:.3e}"),
        ),
        None => (
            "coherent_closed_form",
            1e-6,
            format!("position deviation {worst:.3e}"),
        ),
    };
    Ok(ExperimentOutput {
        outputs,
        checks: vec![check(name, worst < tol, detail)],
    })
}

fn continuum_sweep(config: &RunConfig, dir: &Path) -> Result<ExperimentOutput, RunError> {
    let p = &config.params;
    let cubic = match p.model.as_str() {
        "cubic" => true,
        "quadratic" => false,
        other => return Err(RunError::Config(format!("unknown lattice model `{other}`"))),
    };
    let mut csv = String::from("epsilon,mean_rate,dispersion_rate\n");
    let mut pts = Vec::new();
    let mut cubic_ok = true;
    let mut worst_pin = 0.0f64;
    for &eps in &p.epsilons {
        let half = if cubic { 5.0 } else { 8.0 };
        let points = (2.0 * half / eps).round() as usize + 1;
        let grid = Grid1D::new(-half, half, points);
        let kind = if cubic {
            LatticeKind::Cubic { kappa: p.kappa }
        } else {
            LatticeKind::Quadratic { mass: 1.0 }
        };
        let hl = LatticeHamiltonian::new(grid, kind, |_| 0.0);
        let psi = if cubic {
            lattice_state(&grid, |x| C64::new((-x * x / 2.0).exp(), 0.0))
        } else {
            lattice_state(&grid, |x| {
                C64::from_polar((-x * x / 2.0).exp(), p.k_phase * x)
            })
        };
        let d = continuum_diagnostics(&psi, &hl, grid.nearest_index(0.0))?;
        let _ = writeln!(csv, "{},{},{}", d.epsilon, d.mean_rate, d.dispersion_rate);
        if cubic {
            cubic_ok &= d.mean_rate.abs() < 1e-12;
            let pin = (d.epsilon * d.dispersion_rate - 12.0 * p.kappa).abs() / (12.0 * p.kappa);
            worst_pin = worst_pin.max(pin);
            cubic_ok &= pin < 0.01;
        } else {
            pts.push((d.epsilon.ln(), d.dispersion_rate.ln()));
        }
    }
    let outputs = vec![write_file(dir, "diagnostics.csv", &csv)?];
    let checks = if cubic {
        vec![check(
            "cubic_no_continuum_limit",
            cubic_ok,
            format!(
                "mean rate ≡ 0, ε·dispersion off 12κ = {} by {worst_pin:.2e}",
                12.0 * p.kappa
            ),
        )]
    } else {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|q| q.0).sum();
        let sy: f64 = pts.iter().map(|q| q.1).sum();
        let sxx: f64 = pts.iter().map(|q| q.0 * q.0).sum();
        let sxy: f64 = pts.iter().map(|q| q.0 * q.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        vec![check(
            "quadratic_dispersion_slope",
            (slope - 1.0).abs() <= 0.1,
            format!("log-log slope {slope:.3} (want 1.0 ± 0.1)"),
        )]
    };
    Ok(ExperimentOutput { outputs, checks })
}

fn phase_csv(rows: &[(f64, C64, TrajectorySource)]) -> String {
    let mut out = String::from("t,alpha_re,alpha_im,source\n");
    for (t, a, src) in rows {
        let _ = writeln!(out, "{t},{},{},{}", a.re, a.im, src.as_str());
    }
    out
}

fn husimi_oscillator(config: &RunConfig, dir: &Path) -> Result<ExperimentOutput, RunError> {
    let p = &config.params;
    let (state, fock_n) = initial_oscillator_state(p)?;
    let alpha0 = p.alpha0();
    let kind = match fock_n {
        Some(n) => ClosedFormKind::HusimiFock { n },
        None => ClosedFormKind::HusimiCoherent { beta: p.beta() },
    };
    let omega_fast = match fock_n {
        Some(n) => p.omega * (1.0 + n as f64 / alpha0.norm_sqr().max(1e-12)) / 2.0,
        None => p.omega,
    };
    let n_out = ((p.t_max / p.dt).ceil() as usize).clamp(2, 100_000);
    let traj = integrate_husimi(
        p.omega,
        &state,
        alpha0,
        p.t_max,
        n_out + 1,
        &OdeOptions::for_frequency(omega_fast.max(p.omega)),
    )
    .map_err(|f| RunError::from(f.error))?;

    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (t, a) in traj.times.iter().zip(&traj.alphas) {
        rows.push((*t, *a, TrajectorySource::Numeric));
        let cf = closed_form(kind, p.omega, alpha0, *t)?;
        rows.push((*t, cf, TrajectorySource::ClosedForm));
        worst = worst.max((a - cf).norm() / alpha0.norm().max(1e-12));
    }
    let outputs = vec![write_file(dir, "trajectory.csv", &phase_csv(&rows))?];
    let checks = vec![check(
        "closed_form_residual",
        worst < 1e-6,
        format!("max relative residual {worst:.3e} (tol 1e-6)"),
    )];
    Ok(ExperimentOutput { outputs, checks })
}

fn bohm_oscillator(config: &RunConfig, dir: &Path) -> Result<ExperimentOutput, RunError> {
    let p = &config.params;
    let (state, fock_n) = initial_oscillator_state(p)?;
    let provider = FockFieldProvider::oscillator(&state, p.omega);
    let x0 = p.x0.unwrap_or(2f64.sqrt() * p.alpha0_re);
    let traj = modalflow_core::bohm::integrate_trajectory(
        |t, x| provider.velocity(t, x),
        x0,
        p.t_max,
        &OdeOptions::for_frequency(p.omega),
    )
    .map_err(|f| RunError::from(f.error))?;

    let y0 = provider.momentum(0.0, x0).map_err(RunError::from)?;
    let alpha0 = C64::new(x0, y0) / C64::new(2f64.sqrt(), 0.0);
    let kind = match fock_n {
        Some(_) => ClosedFormKind::PositionFock,
        None => ClosedFormKind::PositionCoherent { beta: p.beta() },
    };
    let n_out = ((p.t_max / p.dt).ceil() as usize).clamp(2, 100_000);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for k in 0..=n_out {
        let t = p.t_max * k as f64 / n_out as f64;
        let x = traj.sample(t);
        let y = provider.momentum(t, x).map_err(RunError::from)?;
        let alpha = C64::new(x, y) / C64::new(2f64.sqrt(), 0.0);
        rows.push((t, alpha, TrajectorySource::Numeric));
        let cf = closed_form(kind, p.omega, alpha0, t)?;
        rows.push((t, cf, TrajectorySource::ClosedForm));
        worst = worst.max((alpha - cf).norm());
    }
    let outputs = vec![write_file(dir, "trajectory.csv", &phase_csv(&rows))?];
    let (tol, label) = match fock_n {
        Some(_) => (1e-10, "number state frozen"),
        None => (1e-6, "coherent closed form"),
    };
    let checks = vec![check(
        "closed_form_residual",
        worst < tol,
        format!("{label}: max residual {worst:.3e} (tol {tol:.0e})"),
    )];
    Ok(ExperimentOutput { outputs, checks })
}

fn classical_limit(config: &RunConfig, dir: &Path) -> Result<ExperimentOutput, RunError> {
    let p = &config.params;
    let rep = classical_limit_report(&p.family, p.omega, p.samples, p.t_max, config.seed)?;

    #[derive(serde::Serialize)]
    struct Entry {
        scenario: &'static str,
        n_or_beta: usize,
        median_distance: f64,
        quartiles: [f64; 2],
    }
    let mut entries = Vec::new();
    for e in &rep.husimi {
        entries.push(Entry {
            scenario: "husimi_fock",
            n_or_beta: e.n,
            median_distance: e.median,
            quartiles: [e.lower_quartile, e.upper_quartile],
        });
    }
    for e in &rep.position {
        entries.push(Entry {
            scenario: "position_fock",
            n_or_beta: e.n,
            median_distance: e.median,
            quartiles: [e.lower_quartile, e.upper_quartile],
        });
    }
    let outputs = vec![write_file(
        dir,
        "report.json",
        &serde_json::to_string_pretty(&entries).expect("report serializes"),
    )?];

    let medians: Vec<f64> = rep.husimi.iter().map(|e| e.median).collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let position_ok = rep.position.iter().all(|e| e.median > 0.5);
    let checks = vec![
        check(
            "husimi_medians_decrease",
            decreasing,
            format!("{medians:?}"),
        ),
        check(
            "position_stays_nonclassical",
            position_ok,
            format!(
                "{:?}",
                rep.position.iter().map(|e| e.median).collect::<Vec<_>>()
            ),
        ),
    ];
    Ok(ExperimentOutput { outputs, checks })
}

fn verify_all(config: &RunConfig, dir: &Path) -> Result<ExperimentOutput, RunError> {
    let reports = modalflow_core::verify::run_all(config.seed);
    let mut text = String::new();
    let mut checks = Vec::new();
    for r in &reports {
        let _ = writeln!(
            text,
            "suite {}: {} — {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
        checks.push(check(r.name, r.passed, r.detail.clone()));
    }
    print!("{text}");
    let outputs = vec![write_file(dir, "verify.txt", &text)?];
    Ok(ExperimentOutput { outputs, checks })
}
