//! Naimark extensions: projective measures on an enlarged space whose
//! statistics on lifted states reproduce a given POM.
//!
//! Two concrete extensions ship with the crate: the qubit trine (three
//! symmetric effects lifted to four projectors on a two-qubit space) and a
//! quadrature extension for the truncated oscillator (the joint-position
//! eigenbasis on system ⊗ auxiliary mode, which induces a vacuum-weighted
//! position POM on the system). [`verify_extension`] checks user-supplied
//! extensions against a random state battery.

use num_complex::Complex64 as C64;

use crate::error::{ModalError, Result};
use crate::hilbert::{
    born_probabilities, tensor_states, HermitianOperator, MeasureSet, PureState, RawVector,
};
use crate::jump::{probability_current, CurrentMatrix};
use crate::linalg::{self, CMatrix};
use crate::rng::{derive_rng, standard_normal};
use crate::tol;

/// Outcome value attached to a completion projector; excluded from
/// statistics.
pub fn completion_sentinel() -> C64 {
    C64::new(f64::NAN, f64::NAN)
}

/// A projective measure on `uni ⊗ aux` reproducing a POM on `uni` for
/// states lifted with the fixed auxiliary state.
#[derive(Debug, Clone)]
pub struct NaimarkExtension {
    pub uni_dim: usize,
    pub aux_dim: usize,
    /// Auxiliary state `|φ⟩` the guiding state is lifted with.
    pub aux_state: PureState,
    /// Projective measure on the enlarged space. Outcome `n < pom_len`
    /// matches POM element `n`; a completion projector, when present, sits
    /// at `completion_index` and carries the sentinel value.
    pub projectors: MeasureSet,
    pub completion_index: Option<usize>,
}

impl NaimarkExtension {
    pub fn enlarged_dim(&self) -> usize {
        self.uni_dim * self.aux_dim
    }

    /// Number of POM outcomes (completion projector excluded).
    pub fn pom_len(&self) -> usize {
        self.projectors.len() - self.completion_index.map_or(0, |_| 1)
    }
}

/// Lift the guiding state: `|Φ⟩ = |Ψ⟩ ⊗ |φ⟩`.
pub fn lift_guiding_state(psi: &PureState, ext: &NaimarkExtension) -> Result<PureState> {
    if psi.dim() != ext.uni_dim {
        return Err(ModalError::dimension(ext.uni_dim, psi.dim(), "lift"));
    }
    Ok(tensor_states(psi, &ext.aux_state))
}

/// Current on the enlarged space with drive `H_uni ⊗ 1_aux - R'`.
pub fn lifted_current(
    phi: &PureState,
    ext: &NaimarkExtension,
    h_uni: &HermitianOperator,
    r_prime: Option<&HermitianOperator>,
) -> Result<CurrentMatrix> {
    if h_uni.dim() != ext.uni_dim {
        return Err(ModalError::dimension(
            ext.uni_dim,
            h_uni.dim(),
            "lifted current",
        ));
    }
    let one_aux = HermitianOperator::new(CMatrix::identity(ext.aux_dim))?;
    let h_ext = crate::hilbert::tensor_operators(h_uni, &one_aux);
    probability_current(phi, &ext.projectors, &h_ext, r_prime)
}

/// Report from [`verify_extension`].
#[derive(Debug, Clone)]
pub struct ExtensionReport {
    /// Worst `|⟨Ψ|F_n|Ψ⟩ - ⟨Φ|Π_n|Φ⟩|` over the state battery.
    pub max_deviation: f64,
    /// `|Σ_n Π_n - 1|` residual.
    pub completeness_residual: f64,
    /// Worst `|Π_n Π_m - δ_nm Π_n|` residual.
    pub orthogonality_residual: f64,
    /// Worst lifted probability of the completion projector.
    pub completion_probability: f64,
    pub trials: usize,
}

impl ExtensionReport {
    pub fn passes(&self, dilation_tol: f64) -> bool {
        self.max_deviation < dilation_tol
            && self.completeness_residual < tol::COMPLETENESS_TOL
            && self.orthogonality_residual < tol::PROJ_TOL
            && self.completion_probability < tol::P_FLOOR
    }
}

/// Check the dilation identity `⟨Ψ|F_n|Ψ⟩ = ⟨Φ|Π_n|Φ⟩` on `trials`
/// Haar-random states, along with completeness, orthogonality and the
/// vanishing of the completion outcome. Violations are reported, not
/// thrown.
pub fn verify_extension(
    pom: &MeasureSet,
    ext: &NaimarkExtension,
    trials: usize,
    seed: u64,
) -> Result<ExtensionReport> {
    if pom.dim() != ext.uni_dim {
        return Err(ModalError::dimension(
            ext.uni_dim,
            pom.dim(),
            "verify extension",
        ));
    }
    if pom.len() != ext.pom_len() {
        return Err(ModalError::MeasureInvariant(format!(
            "POM has {} outcomes, extension expects {}",
            pom.len(),
            ext.pom_len()
        )));
    }
    let enlarged = ext.enlarged_dim();

    // Structural residuals.
    let mut sum = CMatrix::zeros(enlarged, enlarged);
    let elements: Vec<CMatrix> = (0..ext.projectors.len())
        .map(|n| ext.projectors.element(n))
        .collect();
    for e in &elements {
        sum = sum.add(e);
    }
    let completeness_residual = sum.max_abs_diff(&CMatrix::identity(enlarged));
    let mut orthogonality_residual = 0.0f64;
    for n in 0..elements.len() {
        for m in n..elements.len() {
            let prod = elements[n].matmul(&elements[m]);
            let expect = if n == m {
                elements[n].clone()
            } else {
                CMatrix::zeros(enlarged, enlarged)
            };
            orthogonality_residual = orthogonality_residual.max(prod.max_abs_diff(&expect));
        }
    }

    let mut rng = derive_rng(seed, 0);
    let mut max_deviation = 0.0f64;
    let mut completion_probability = 0.0f64;
    for _ in 0..trials {
        let raw: Vec<C64> = (0..ext.uni_dim)
            .map(|_| C64::new(standard_normal(&mut rng), standard_normal(&mut rng)))
            .collect();
        let psi = RawVector(raw).normalized()?;
        let phi = lift_guiding_state(&psi, ext)?;
        let p_uni = born_probabilities(&psi, pom)?;
        let p_ext = born_probabilities(&phi, &ext.projectors)?;
        let mut k = 0usize;
        for (n, p) in p_ext.iter().enumerate() {
            if Some(n) == ext.completion_index {
                completion_probability = completion_probability.max(*p);
            } else {
                max_deviation = max_deviation.max((p - p_uni[k]).abs());
                k += 1;
            }
        }
    }

    Ok(ExtensionReport {
        max_deviation,
        completeness_residual,
        orthogonality_residual,
        completion_probability,
        trials,
    })
}

/// The qubit trine: three symmetric states on the Bloch equator and their
/// subnormalized projectors as a POM, plus the four-projector extension.
#[derive(Debug, Clone)]
pub struct TrineModel {
    /// The three `|z_n⟩` on the system qubit.
    pub states: [PureState; 3],
    /// Effects `F_n = (2/3)|z_n⟩⟨z_n|` with values `z_n = exp(i2πn/3)`.
    pub pom: MeasureSet,
    pub extension: NaimarkExtension,
}

/// Build the trine POM and its Naimark extension on two qubits.
///
/// The extension projectors are rank-1:
/// `Π_n = |w_n⟩⟨w_n|` with `|w_n⟩ = √(2/3)|z_n⟩|φ⟩ + √(1/3)|z_2⟩|φ'⟩` for
/// `n = 1..3`, and `Π_4 = |z_2^⊥⟩⟨z_2^⊥| ⊗ |φ'⟩⟨φ'|` completing the set.
/// The carrier coefficient must share one sign across all three `|w_n⟩`
/// for the projectors to be orthogonal.
pub fn build_trine_extension() -> TrineModel {
    let z: Vec<C64> = (1..=3)
        .map(|n| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * n as f64 / 3.0))
        .collect();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let kets: Vec<Vec<C64>> = z
        .iter()
        .map(|zn| vec![zn * inv_sqrt2, zn.conj() * inv_sqrt2])
        .collect();
    let states: [PureState; 3] = [
        PureState::new(kets[0].clone()).unwrap().with_label("z1"),
        PureState::new(kets[1].clone()).unwrap().with_label("z2"),
        PureState::new(kets[2].clone()).unwrap().with_label("z3"),
    ];
    let effects: Vec<CMatrix> = kets
        .iter()
        .map(|k| CMatrix::outer(k).scale(C64::new(2.0 / 3.0, 0.0)))
        .collect();
    let pom = MeasureSet::pom(effects, z.clone()).unwrap();

    let aux_state = PureState::basis(2, 0);
    let w_amp = (2.0f64 / 3.0).sqrt();
    let c_amp = (1.0f64 / 3.0).sqrt();
    let carrier = &kets[1];
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(4);
    for ket in &kets {
        // (uni, aux) kron convention: index 2*i_uni + i_aux.
        let mut w = vec![C64::new(0.0, 0.0); 4];
        for i in 0..2 {
            w[2 * i] += ket[i] * w_amp;
            w[2 * i + 1] += carrier[i] * c_amp;
        }
        columns.push(w);
    }
    // Completion: the carrier's orthogonal complement on the primed slot.
    let perp = [z[1] * inv_sqrt2, -(z[1].conj() * inv_sqrt2)];
    let mut w4 = vec![C64::new(0.0, 0.0); 4];
    for i in 0..2 {
        w4[2 * i + 1] = perp[i];
    }
    columns.push(w4);

    let basis = CMatrix::from_fn(4, 4, |i, j| columns[j][i]);
    let mut values = z;
    values.push(completion_sentinel());
    let projectors = MeasureSet::from_orthonormal_columns(basis, values).unwrap();

    TrineModel {
        states,
        pom,
        extension: NaimarkExtension {
            uni_dim: 2,
            aux_dim: 2,
            aux_state,
            projectors,
            completion_index: Some(3),
        },
    }
}

/// Quadrature extension of the truncated oscillator: the eigenbasis of
/// `x⁺ = (X_uni + X_aux)/√2` on `uni ⊗ aux` with the auxiliary mode in
/// vacuum. Outcome values are the `x⁺` eigenvalues. The induced POM on the
/// system consists of position projectors weighted by the vacuum overlap
/// of the auxiliary node, so the dilation identity holds exactly; no
/// completion projector is needed.
pub fn build_quadrature_extension(
    uni_dim: usize,
    aux_dim: usize,
) -> Result<(MeasureSet, NaimarkExtension)> {
    let (x_uni, v_uni) = position_eigenbasis(uni_dim)?;
    let (x_aux, v_aux) = position_eigenbasis(aux_dim)?;

    let basis = v_uni.kron(&v_aux);
    let mut values = Vec::with_capacity(uni_dim * aux_dim);
    for &xi in &x_uni {
        for &xj in &x_aux {
            values.push(C64::new((xi + xj) / 2f64.sqrt(), 0.0));
        }
    }
    let projectors = MeasureSet::from_orthonormal_columns(basis, values)?;

    // Induced POM on the system: F_(i,j) = |⟨0|u_j⟩|² |v_i⟩⟨v_i|.
    let vacuum_weights: Vec<f64> = (0..aux_dim).map(|j| v_aux.get(0, j).norm_sqr()).collect();
    let mut effects = Vec::with_capacity(uni_dim * aux_dim);
    let mut pom_values = Vec::with_capacity(uni_dim * aux_dim);
    for i in 0..uni_dim {
        let col: Vec<C64> = (0..uni_dim).map(|r| v_uni.get(r, i)).collect();
        let proj = CMatrix::outer(&col);
        for j in 0..aux_dim {
            effects.push(proj.scale(C64::new(vacuum_weights[j], 0.0)));
            pom_values.push(C64::new((x_uni[i] + x_aux[j]) / 2f64.sqrt(), 0.0));
        }
    }
    let pom = MeasureSet::pom(effects, pom_values)?;

    let ext = NaimarkExtension {
        uni_dim,
        aux_dim,
        aux_state: PureState::basis(aux_dim, 0),
        projectors,
        completion_index: None,
    };
    Ok((pom, ext))
}

/// Eigen-nodes and eigenvectors of the truncated position quadrature
/// `X = (a + a†)/√2` (a real symmetric tridiagonal matrix).
pub fn position_eigenbasis(dim: usize) -> Result<(Vec<f64>, CMatrix)> {
    let diag = vec![0.0; dim];
    let off: Vec<f64> = (1..dim).map(|m| (m as f64 / 2.0).sqrt()).collect();
    let (values, vecs) = linalg::eigh_tridiagonal(&diag, &off)?;
    let v = CMatrix::from_fn(dim, dim, |i, j| C64::new(vecs[i * dim + j], 0.0));
    Ok((values, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{harmonic_hamiltonian, validate_measure, MeasureKind, StateSpec};

    #[test]
    fn trine_pom_is_valid_and_not_projective() {
        let trine = build_trine_extension();
        assert_eq!(trine.pom.kind(), MeasureKind::Pom);
        assert_eq!(validate_measure(&trine.pom).unwrap(), Ok(()));
        // Effects are not idempotent: (2/3)² ≠ 2/3.
        let f1 = trine.pom.element(0);
        assert!(f1.matmul(&f1).max_abs_diff(&f1) > 0.1);
    }

    #[test]
    fn trine_born_probabilities() {
        let trine = build_trine_extension();
        let p = born_probabilities(&trine.states[0], &trine.pom).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((p[1] - 1.0 / 6.0).abs() < 1e-14);
        assert!((p[2] - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn trine_extension_completeness_and_orthogonality() {
        let trine = build_trine_extension();
        let elements: Vec<CMatrix> = (0..4)
            .map(|n| trine.extension.projectors.element(n))
            .collect();
        let mut sum = CMatrix::zeros(4, 4);
        for e in &elements {
            sum = sum.add(e);
        }
        assert!(sum.max_abs_diff(&CMatrix::identity(4)) < 1e-12);
        assert!(elements[0].matmul(&elements[1]).max_abs() < 1e-12);
        for n in 0..4 {
            for m in 0..4 {
                let prod = elements[n].matmul(&elements[m]);
                let expect = if n == m {
                    elements[n].clone()
                } else {
                    CMatrix::zeros(4, 4)
                };
                assert!(prod.max_abs_diff(&expect) < 1e-12);
            }
        }
    }

    #[test]
    fn trine_lifted_probabilities_match_pom() {
        let trine = build_trine_extension();
        let phi = lift_guiding_state(&trine.states[0], &trine.extension).unwrap();
        let p = born_probabilities(&phi, &trine.extension.projectors).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 6.0).abs() < 1e-12);
        assert!((p[2] - 1.0 / 6.0).abs() < 1e-12);
        assert!(p[3] < 1e-14);
    }

    #[test]
    fn lift_norm_phase_and_completion_projection() {
        let trine = build_trine_extension();
        let phi = lift_guiding_state(&trine.states[0], &trine.extension).unwrap();
        assert!((linalg::vnorm(phi.amplitudes()) - 1.0).abs() < 1e-14);

        // Completion projector annihilates every lifted state.
        let projected = trine
            .extension
            .projectors
            .apply_element(3, phi.amplitudes());
        assert!(linalg::vnorm(&projected) < 1e-12);

        // Lift commutes with a global phase.
        let phase = C64::from_polar(1.0, 1.234);
        let rotated = PureState::new(linalg::vscale(trine.states[0].amplitudes(), phase)).unwrap();
        let phi_rot = lift_guiding_state(&rotated, &trine.extension).unwrap();
        for (a, b) in phi_rot.amplitudes().iter().zip(phi.amplitudes()) {
            assert!((a - b * phase).norm() < 1e-14);
        }
    }

    #[test]
    fn trine_verifies_at_dilation_tolerance() {
        let trine = build_trine_extension();
        let report = verify_extension(&trine.pom, &trine.extension, 1000, 99).unwrap();
        assert!(report.max_deviation < 1e-10, "{report:?}");
        assert!(report.completeness_residual < 1e-12);
        assert!(report.orthogonality_residual < 1e-12);
        assert!(report.passes(tol::DILATION_TOL));
    }

    #[test]
    fn degenerate_dilation_of_a_projective_measure() {
        // aux_dim = 1 and Π_n = π_n ⊗ 1 gives deviation 0.
        let basis = CMatrix::identity(2);
        let values = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let pom = MeasureSet::pom(
            vec![
                CMatrix::outer(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
                CMatrix::outer(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
            ],
            values.clone(),
        )
        .unwrap();
        let ext = NaimarkExtension {
            uni_dim: 2,
            aux_dim: 1,
            aux_state: PureState::basis(1, 0),
            projectors: MeasureSet::from_orthonormal_columns(basis, values).unwrap(),
            completion_index: None,
        };
        let report = verify_extension(&pom, &ext, 200, 5).unwrap();
        assert_eq!(report.max_deviation, 0.0);
    }

    #[test]
    fn corrupted_projector_is_flagged() {
        let trine = build_trine_extension();
        let mut elements: Vec<CMatrix> = (0..4)
            .map(|n| trine.extension.projectors.element(n))
            .collect();
        elements[0] = elements[0].scale(C64::new(1.01, 0.0));
        let projectors =
            MeasureSet::projective(elements, trine.extension.projectors.values().to_vec()).unwrap();
        let corrupted = NaimarkExtension {
            projectors,
            ..trine.extension.clone()
        };
        let report = verify_extension(&trine.pom, &corrupted, 100, 5).unwrap();
        assert!(report.max_deviation > 1e-3);
        assert!(!report.passes(tol::DILATION_TOL));
    }

    #[test]
    fn trine_static_current_vanishes() {
        let trine = build_trine_extension();
        let phi = lift_guiding_state(&trine.states[0], &trine.extension).unwrap();
        let h = HermitianOperator::zero(2);
        let j = lifted_current(&phi, &trine.extension, &h, None).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(j.get(a, b), 0.0);
            }
        }
    }

    #[test]
    fn extension_fixture_round_trips_through_json() {
        let trine = build_trine_extension();
        let json = serde_json::to_string(&trine.extension.projectors).unwrap();
        let back: MeasureSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back.dim(), 4);
        for n in 0..4 {
            assert!(
                back.element(n)
                    .max_abs_diff(&trine.extension.projectors.element(n))
                    < 1e-15
            );
        }
        // Sentinel value survives as NaN.
        assert!(back.values()[3].re.is_nan());
    }

    #[test]
    fn projector_diagonal_drive_carries_no_current() {
        // H = Σ_n c_n Π_n commutes with every projector, so J = 0 for any
        // lifted state.
        let trine = build_trine_extension();
        let mut h = CMatrix::zeros(4, 4);
        for (n, c) in [0.3, -1.1, 0.7, 2.0].iter().enumerate() {
            h = h.add(
                &trine
                    .extension
                    .projectors
                    .element(n)
                    .scale(C64::new(*c, 0.0)),
            );
        }
        let h = HermitianOperator::new(h).unwrap();
        let phi = lift_guiding_state(&trine.states[1], &trine.extension).unwrap();
        let j = probability_current(&phi, &trine.extension.projectors, &h, None).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert!(j.get(a, b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quadrature_extension_dilates_exactly() {
        let (pom, ext) = build_quadrature_extension(8, 8).unwrap();
        let report = verify_extension(&pom, &ext, 200, 17).unwrap();
        assert!(report.max_deviation < 1e-12, "{report:?}");
        assert!(report.completeness_residual < 1e-12);
        assert!(report.orthogonality_residual < 1e-12);
    }

    #[test]
    fn quadrature_extension_moments_match_husimi_marginal() {
        // For |Φ⟩ = |β⟩|0⟩ the x⁺ marginal is a Gaussian centered at
        // Re β with variance 1/2.
        let (_, ext) = build_quadrature_extension(24, 24).unwrap();
        let beta = C64::new(0.7, -0.3);
        let psi = crate::hilbert::make_state(&StateSpec::Coherent(beta), 24).unwrap();
        let phi = lift_guiding_state(&psi, &ext).unwrap();
        let p = born_probabilities(&phi, &ext.projectors).unwrap();
        let values = ext.projectors.values();
        let mean: f64 = p.iter().zip(values).map(|(pi, v)| pi * v.re).sum();
        let second: f64 = p.iter().zip(values).map(|(pi, v)| pi * v.re * v.re).sum();
        assert!((mean - beta.re).abs() < 1e-8, "mean {mean}");
        assert!(
            (second - mean * mean - 0.5).abs() < 1e-6,
            "variance {}",
            second - mean * mean
        );
    }

    #[test]
    fn lifted_current_row_sums_match_finite_differences() {
        // Oscillator drive on the quadrature extension: d_t P_n from the
        // current row sums against centered differences of the Born
        // probabilities.
        let (du, da) = (12, 12);
        let (_, ext) = build_quadrature_extension(du, da).unwrap();
        let omega = 1.0;
        let h_uni = harmonic_hamiltonian(omega, du);
        let psi0 =
            crate::hilbert::make_state(&StateSpec::Coherent(C64::new(1.0, 0.0)), du).unwrap();
        let dt = 1e-4;
        let prop = crate::hilbert::Propagator::new(&h_uni).unwrap();
        let probs_at = |t: f64| {
            let psi = prop.evolve(&psi0, t).unwrap();
            let phi = lift_guiding_state(&psi, &ext).unwrap();
            born_probabilities(&phi, &ext.projectors).unwrap()
        };
        let t = 0.3;
        let phi = lift_guiding_state(&prop.evolve(&psi0, t).unwrap(), &ext).unwrap();
        let j = lifted_current(&phi, &ext, &h_uni, None).unwrap();
        let sums = j.row_sums();
        let (pp, pm) = (probs_at(t + dt), probs_at(t - dt));
        for n in 0..ext.projectors.len() {
            let fd = (pp[n] - pm[n]) / (2.0 * dt);
            assert!(
                (fd - sums[n]).abs() < 1e-6,
                "outcome {n}: fd {fd} vs row sum {}",
                sums[n]
            );
        }
    }
}
