//! Shared oracles for the integration suites. Everything here evaluates
//! reference quantities through routes independent of the library paths
//! under test (plain quadrature and direct series).

use modalflow_core::linalg::CMatrix;
use modalflow_core::C64;

/// Composite Simpson rule for a complex integrand; `n` panels (rounded up
/// to even).
pub fn simpson<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, n: usize) -> C64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + k as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// Harmonic-oscillator position amplitudes ⟨x|m⟩ for m < dim, computed
/// locally (kept independent of the library's own recurrence helpers in
/// spirit: same classical formulas, separate code path).
pub fn hermite_functions(x: f64, dim: usize) -> Vec<f64> {
    let mut phi = Vec::with_capacity(dim);
    phi.push(std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp());
    if dim > 1 {
        phi.push(std::f64::consts::SQRT_2 * x * phi[0]);
    }
    for m in 1..dim.saturating_sub(1) {
        let mf = m as f64;
        let nxt = (2.0 / (mf + 1.0)).sqrt() * x * phi[m] - (mf / (mf + 1.0)).sqrt() * phi[m - 1];
        phi.push(nxt);
    }
    phi
}

/// Joint-eigenvalue amplitudes `A_m = ⟨x⁺,y⁻| (|m⟩_uni ⊗ |0⟩_aux)⟩` for all
/// `m < d_uni`, evaluated by quadrature of the defining integral
/// `∫ dx'/√(2π) e^{-i y⁻ x'} ⟨(x⁺+x')/√2|m⟩ ⟨(x⁺-x')/√2|0⟩`.
pub fn quadrature_joint_amplitudes(x_plus: f64, y_minus: f64, d_uni: usize) -> Vec<C64> {
    let width = 2.0 * (2.0 * d_uni as f64).sqrt() + 12.0 + 2.0 * x_plus.abs();
    let (a, b) = (x_plus - width, x_plus + width);
    let n = ((b - a) / 1.5e-3).ceil() as usize;
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = vec![C64::new(0.0, 0.0); d_uni];
    for k in 0..=n {
        let xp = a + k as f64 * h;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let u = (x_plus + xp) / std::f64::consts::SQRT_2;
        let v = (x_plus - xp) / std::f64::consts::SQRT_2;
        let aux0 = std::f64::consts::PI.powf(-0.25) * (-v * v / 2.0).exp();
        if aux0 == 0.0 {
            continue;
        }
        let phase = C64::from_polar(1.0, -y_minus * xp);
        let phi = hermite_functions(u, d_uni);
        let common = phase * (w * aux0 * norm);
        for (am, pm) in acc.iter_mut().zip(&phi) {
            *am += common * *pm;
        }
    }
    for am in &mut acc {
        *am *= h / 3.0;
    }
    acc
}

/// `⟨x⁺,y⁻|Θ⟩` for a general enlarged-space vector with coefficient
/// matrix `Θ[m][k]` over `|m⟩_uni ⊗ |k⟩_aux`, by the same quadrature.
pub fn quadrature_enlarged_amplitude(x_plus: f64, y_minus: f64, theta: &CMatrix) -> C64 {
    let (d_uni, d_aux) = (theta.rows(), theta.cols());
    let dmax = d_uni.max(d_aux) as f64;
    let width = 2.0 * (2.0 * dmax).sqrt() + 12.0 + 2.0 * x_plus.abs();
    let (a, b) = (x_plus - width, x_plus + width);
    let n = ((b - a) / 1.5e-3).ceil() as usize;
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..=n {
        let xp = a + k as f64 * h;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let u = (x_plus + xp) / std::f64::consts::SQRT_2;
        let v = (x_plus - xp) / std::f64::consts::SQRT_2;
        let phi_u = hermite_functions(u, d_uni);
        let phi_v = hermite_functions(v, d_aux);
        let mut val = C64::new(0.0, 0.0);
        for m in 0..d_uni {
            if phi_u[m] == 0.0 {
                continue;
            }
            let mut row = C64::new(0.0, 0.0);
            for kk in 0..d_aux {
                row += theta.get(m, kk) * phi_v[kk];
            }
            val += row * phi_u[m];
        }
        acc += val * C64::from_polar(1.0, -y_minus * xp) * w;
    }
    acc * (h / 3.0) * norm
}
