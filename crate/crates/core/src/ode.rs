//! Adaptive Dormand–Prince 5(4) integration for small real or complex
//! states, with cubic Hermite dense output between accepted steps.

use num_complex::Complex64 as C64;

/// State supported by the integrator.
pub trait OdeState: Clone {
    fn lin_comb(base: &Self, terms: &[(f64, &Self)]) -> Self;
    /// Infinity norm of `Σ c_i k_i`, used for the embedded error estimate.
    fn comb_norm(terms: &[(f64, &Self)]) -> f64;
    fn abs_max(&self) -> f64;
}

impl OdeState for f64 {
    fn lin_comb(base: &Self, terms: &[(f64, &Self)]) -> Self {
        base + terms.iter().map(|(c, k)| c * **k).sum::<f64>()
    }
    fn comb_norm(terms: &[(f64, &Self)]) -> f64 {
        terms.iter().map(|(c, k)| c * **k).sum::<f64>().abs()
    }
    fn abs_max(&self) -> f64 {
        self.abs()
    }
}

impl OdeState for C64 {
    fn lin_comb(base: &Self, terms: &[(f64, &Self)]) -> Self {
        base + terms.iter().map(|(c, k)| *k * *c).sum::<C64>()
    }
    fn comb_norm(terms: &[(f64, &Self)]) -> f64 {
        terms.iter().map(|(c, k)| *k * *c).sum::<C64>().norm()
    }
    fn abs_max(&self) -> f64 {
        self.norm()
    }
}

/// Why an integration stopped early. The partial path up to the failure is
/// preserved alongside.
#[derive(Debug)]
pub struct OdeFailure<V, E> {
    pub partial: OdePath<V>,
    pub reason: OdeStop<E>,
}

#[derive(Debug)]
pub enum OdeStop<E> {
    /// The right-hand side refused to evaluate.
    Rhs(E),
    /// Step size underflowed while controlling the local error.
    StepUnderflow { t: f64, h: f64 },
    /// Step budget exhausted.
    MaxSteps { t: f64 },
}

/// Accepted steps of a solution, with derivative values for interpolation.
#[derive(Debug, Clone)]
pub struct OdePath<V> {
    pub ts: Vec<f64>,
    pub ys: Vec<V>,
    pub fs: Vec<V>,
}

impl<V: OdeState> OdePath<V> {
    pub fn end_time(&self) -> f64 {
        *self.ts.last().expect("path has at least the initial point")
    }

    /// Cubic Hermite interpolation at `t` within the covered interval.
    pub fn sample(&self, t: f64) -> V {
        let n = self.ts.len();
        assert!(n >= 1);
        if t <= self.ts[0] {
            return self.ys[0].clone();
        }
        if t >= self.ts[n - 1] {
            return self.ys[n - 1].clone();
        }
        let mut lo = match self.ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.ys[i].clone(),
            Err(i) => i - 1,
        };
        if lo >= n - 1 {
            lo = n - 2;
        }
        let (t0, t1) = (self.ts[lo], self.ts[lo + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        let y0 = &self.ys[lo];
        V::lin_comb(
            &V::lin_comb(y0, &[((h00 - 1.0), y0), (h * h10, &self.fs[lo])]),
            &[(h01, &self.ys[lo + 1]), (h * h11, &self.fs[lo + 1])],
        )
    }
}

/// Integrator options.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
    /// Step-size ceiling. The dense output is cubic between accepted
    /// steps, so callers sampling between nodes should cap the step well
    /// below the solution's oscillation period.
    pub max_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            abs_tol: crate::tol::ODE_TOL,
            rel_tol: crate::tol::ODE_TOL,
            initial_step: 1e-4,
            max_steps: 2_000_000,
            max_step: f64::INFINITY,
        }
    }
}

impl OdeOptions {
    /// Options for sampling an oscillatory solution of angular frequency
    /// up to `omega` through the dense output at full precision.
    pub fn for_frequency(omega: f64) -> Self {
        OdeOptions {
            max_step: 0.05 / omega.abs().max(1e-12),
            ..Default::default()
        }
    }
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrate `dy/dt = f(t, y)` from `t0` to `t1 ≥ t0`.
pub fn integrate<V, E2, F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: V,
    opts: &OdeOptions,
) -> Result<OdePath<V>, OdeFailure<V, E2>>
where
    V: OdeState,
    F: FnMut(f64, &V) -> Result<V, E2>,
{
    let mut path = OdePath {
        ts: vec![t0],
        ys: vec![y0.clone()],
        fs: Vec::new(),
    };
    let fail = |path: OdePath<V>, reason| {
        Err(OdeFailure {
            partial: path,
            reason,
        })
    };

    let f0 = match f(t0, &y0) {
        Ok(v) => v,
        Err(e) => return fail(path, OdeStop::Rhs(e)),
    };
    path.fs.push(f0.clone());
    if t1 <= t0 {
        return Ok(path);
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f0;
    let mut h = opts.initial_step.min(t1 - t0);
    let mut steps = 0usize;

    while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return fail(path, OdeStop::MaxSteps { t });
        }
        if h < 1e-14 * t1.abs().max(1.0) {
            return fail(path, OdeStop::StepUnderflow { t, h });
        }
        h = h.min(t1 - t).min(opts.max_step);

        let mut ks: Vec<V> = Vec::with_capacity(7);
        ks.push(k1.clone());
        let mut rhs_err = None;
        for stage in 0..6 {
            let terms: Vec<(f64, &V)> = (0..=stage)
                .filter(|&j| A[stage][j] != 0.0)
                .map(|j| (h * A[stage][j], &ks[j]))
                .collect();
            let y_stage = V::lin_comb(&y, &terms);
            match f(t + C[stage] * h, &y_stage) {
                Ok(v) => ks.push(v),
                Err(e) => {
                    rhs_err = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = rhs_err {
            return fail(path, OdeStop::Rhs(e));
        }

        // 5th-order solution is the last stage combination (FSAL).
        let y_new = V::lin_comb(
            &y,
            &(0..6)
                .filter(|&j| A[5][j] != 0.0)
                .map(|j| (h * A[5][j], &ks[j]))
                .collect::<Vec<_>>(),
        );
        let err_terms: Vec<(f64, &V)> = (0..7)
            .filter(|&j| E[j] != 0.0)
            .map(|j| (h * E[j], &ks[j]))
            .collect();
        let err_abs = V::comb_norm(&err_terms);
        let scale = opts.abs_tol + opts.rel_tol * y.abs_max().max(y_new.abs_max());
        let err = err_abs / scale;

        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = ks[6].clone();
            path.ts.push(t);
            path.ys.push(y.clone());
            path.fs.push(k1.clone());
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Ok(path)
}
