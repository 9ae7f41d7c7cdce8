//! Finite-dimensional Hilbert-space core: pure states, Hermitian operators,
//! measures (projective and POM), tensor products, standard constructors,
//! and Schrödinger evolution by eigendecomposition.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{ModalError, Result};
use crate::linalg::{self, CMatrix, Eigh};
use crate::tol;

/// Normalized state vector. The squared norm is checked to `NORM_TOL` at
/// construction; unnormalized intermediates use [`RawVector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    amplitudes: Vec<C64>,
    label: Option<String>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = linalg::vnorm(&amplitudes);
        if (norm - 1.0).abs() > tol::NORM_TOL {
            return Err(ModalError::MeasureInvariant(format!(
                "state norm {norm} deviates from 1 beyond {:.1e}",
                tol::NORM_TOL
            )));
        }
        Ok(PureState {
            amplitudes,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Basis vector `|k⟩` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim);
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[k] = C64::new(1.0, 0.0);
        PureState {
            amplitudes,
            label: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        linalg::vdot(&self.amplitudes, &other.amplitudes)
    }

    /// Probability mass carried by amplitudes at index `from` and above.
    pub fn tail_mass(&self, from: usize) -> f64 {
        self.amplitudes[from.min(self.dim())..]
            .iter()
            .map(|c| c.norm_sqr())
            .sum()
    }
}

/// Unnormalized amplitude vector, e.g. a projected property state before
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVector(pub Vec<C64>);

impl RawVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        linalg::vnorm(&self.0)
    }

    pub fn normalized(&self) -> Result<PureState> {
        let n = self.norm();
        if n == 0.0 {
            return Err(ModalError::MeasureInvariant(
                "cannot normalize the zero vector".into(),
            ));
        }
        PureState::new(linalg::vscale(&self.0, C64::new(1.0 / n, 0.0)))
    }
}

/// Hermitian matrix; hermiticity checked to `HERM_TOL` at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        assert!(matrix.is_square());
        let residual = matrix.hermiticity_residual();
        if residual > tol::HERM_TOL * matrix.max_abs().max(1.0) {
            return Err(ModalError::Hermiticity { residual });
        }
        Ok(HermitianOperator { matrix })
    }

    pub fn zero(dim: usize) -> Self {
        HermitianOperator {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn expectation(&self, state: &PureState) -> f64 {
        let hv = self.matrix.matvec(state.amplitudes());
        linalg::vdot(state.amplitudes(), &hv).re
    }
}

/// Measure classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    Projective,
    Pom,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum MeasureRepr {
    /// Explicit effect matrices.
    Dense(Vec<CMatrix>),
    /// Rank-1 projectors onto the columns of a complete orthonormal basis.
    Basis(CMatrix),
}

/// A measure: effects (or projectors) with attached outcome values and an
/// optional Hermitian generator driving the elements in time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureSet {
    kind: MeasureKind,
    dim: usize,
    /// Outcome values; NaN sentinels (completion projectors) serialize as
    /// nulls since JSON has no NaN.
    #[serde(with = "value_serde")]
    values: Vec<C64>,
    repr: MeasureRepr,
    generator: Option<HermitianOperator>,
}

mod value_serde {
    use num_complex::Complex64 as C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    fn keep(x: f64) -> Option<f64> {
        x.is_finite().then_some(x)
    }

    pub fn serialize<S: Serializer>(values: &[C64], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<[Option<f64>; 2]> = values.iter().map(|v| [keep(v.re), keep(v.im)]).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let raw: Vec<[Option<f64>; 2]> = Deserialize::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|[re, im]| C64::new(re.unwrap_or(f64::NAN), im.unwrap_or(f64::NAN)))
            .collect())
    }
}

impl MeasureSet {
    /// Projective measure from explicit projector matrices.
    pub fn projective(elements: Vec<CMatrix>, values: Vec<C64>) -> Result<Self> {
        Self::from_dense(MeasureKind::Projective, elements, values)
    }

    /// POM from explicit effect matrices.
    pub fn pom(elements: Vec<CMatrix>, values: Vec<C64>) -> Result<Self> {
        Self::from_dense(MeasureKind::Pom, elements, values)
    }

    fn from_dense(kind: MeasureKind, elements: Vec<CMatrix>, values: Vec<C64>) -> Result<Self> {
        assert!(!elements.is_empty());
        assert_eq!(elements.len(), values.len(), "one value per effect");
        let dim = elements[0].rows();
        for e in &elements {
            if e.rows() != dim || e.cols() != dim {
                return Err(ModalError::dimension(dim, e.rows(), "measure element"));
            }
        }
        Ok(MeasureSet {
            kind,
            dim,
            values,
            repr: MeasureRepr::Dense(elements),
            generator: None,
        })
    }

    /// Rank-1 projective measure onto the columns of `basis`, which must be
    /// a complete orthonormal basis (unitary matrix).
    pub fn from_orthonormal_columns(basis: CMatrix, values: Vec<C64>) -> Result<Self> {
        assert!(basis.is_square());
        assert_eq!(basis.cols(), values.len());
        let dim = basis.rows();
        let gram = basis.dagger().matmul(&basis);
        let residual = gram.max_abs_diff(&CMatrix::identity(dim));
        if residual > tol::PROJ_TOL {
            return Err(ModalError::MeasureInvariant(format!(
                "basis columns not orthonormal: residual {residual:.3e}"
            )));
        }
        Ok(MeasureSet {
            kind: MeasureKind::Projective,
            dim,
            values,
            repr: MeasureRepr::Basis(basis),
            generator: None,
        })
    }

    pub fn with_generator(mut self, generator: HermitianOperator) -> Result<Self> {
        if generator.dim() != self.dim {
            return Err(ModalError::dimension(
                self.dim,
                generator.dim(),
                "measure generator",
            ));
        }
        self.generator = Some(generator);
        Ok(self)
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn generator(&self) -> Option<&HermitianOperator> {
        self.generator.as_ref()
    }

    /// Orthonormal basis backing the measure, if it is rank-1.
    pub fn basis(&self) -> Option<&CMatrix> {
        match &self.repr {
            MeasureRepr::Basis(b) => Some(b),
            MeasureRepr::Dense(_) => None,
        }
    }

    /// Materialize effect `n` as a dense matrix.
    pub fn element(&self, n: usize) -> CMatrix {
        match &self.repr {
            MeasureRepr::Dense(es) => es[n].clone(),
            MeasureRepr::Basis(b) => {
                let col: Vec<C64> = (0..self.dim).map(|i| b.get(i, n)).collect();
                CMatrix::outer(&col)
            }
        }
    }

    /// Apply effect `n` to a vector without materializing it.
    pub fn apply_element(&self, n: usize, v: &[C64]) -> Vec<C64> {
        match &self.repr {
            MeasureRepr::Dense(es) => es[n].matvec(v),
            MeasureRepr::Basis(b) => {
                let col: Vec<C64> = (0..self.dim).map(|i| b.get(i, n)).collect();
                let amp = linalg::vdot(&col, v);
                linalg::vscale(&col, amp)
            }
        }
    }
}

/// Outcome of measure validation: the first violated invariant, if any.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureViolation {
    NotPositive { index: usize, eigenvalue: f64 },
    NotComplete { residual: f64 },
    NotIdempotent { index: usize, residual: f64 },
    NotOrthogonal { pair: (usize, usize), residual: f64 },
}

impl std::fmt::Display for MeasureViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeasureViolation::NotPositive { index, eigenvalue } => {
                write!(f, "element {index} has eigenvalue {eigenvalue:.3e} < 0")
            }
            MeasureViolation::NotComplete { residual } => {
                write!(f, "completeness residual {residual:.3e}")
            }
            MeasureViolation::NotIdempotent { index, residual } => {
                write!(f, "element {index} idempotency residual {residual:.3e}")
            }
            MeasureViolation::NotOrthogonal { pair, residual } => {
                write!(
                    f,
                    "elements {} and {} orthogonality residual {residual:.3e}",
                    pair.0, pair.1
                )
            }
        }
    }
}

/// Check positivity, completeness and (for projective measures)
/// idempotency and mutual orthogonality. Returns the first violation.
pub fn validate_measure(m: &MeasureSet) -> Result<std::result::Result<(), MeasureViolation>> {
    match &m.repr {
        MeasureRepr::Basis(b) => {
            let gram = b.dagger().matmul(b);
            let residual = gram.max_abs_diff(&CMatrix::identity(m.dim));
            if residual > tol::PROJ_TOL {
                return Ok(Err(MeasureViolation::NotOrthogonal {
                    pair: (0, 0),
                    residual,
                }));
            }
            Ok(Ok(()))
        }
        MeasureRepr::Dense(elements) => {
            for (n, e) in elements.iter().enumerate() {
                let eig = linalg::eigh(e)?;
                let min = eig.values.first().copied().unwrap_or(0.0);
                if min < -tol::PSD_TOL {
                    return Ok(Err(MeasureViolation::NotPositive {
                        index: n,
                        eigenvalue: min,
                    }));
                }
            }
            let mut sum = CMatrix::zeros(m.dim, m.dim);
            for e in elements {
                sum = sum.add(e);
            }
            let residual = sum.max_abs_diff(&CMatrix::identity(m.dim));
            if residual > tol::COMPLETENESS_TOL {
                return Ok(Err(MeasureViolation::NotComplete { residual }));
            }
            if m.kind == MeasureKind::Projective {
                for (n, e) in elements.iter().enumerate() {
                    let r = e.matmul(e).max_abs_diff(e);
                    if r > tol::PROJ_TOL {
                        return Ok(Err(MeasureViolation::NotIdempotent {
                            index: n,
                            residual: r,
                        }));
                    }
                }
                for n in 0..elements.len() {
                    for k in (n + 1)..elements.len() {
                        let prod = elements[n].matmul(&elements[k]);
                        let r = prod.max_abs();
                        if r > tol::PROJ_TOL {
                            return Ok(Err(MeasureViolation::NotOrthogonal {
                                pair: (n, k),
                                residual: r,
                            }));
                        }
                    }
                }
            }
            Ok(Ok(()))
        }
    }
}

/// Born probabilities `p_n = ⟨Ψ|E_n|Ψ⟩`, clamped to `[0, 1]`.
pub fn born_probabilities(state: &PureState, m: &MeasureSet) -> Result<Vec<f64>> {
    if state.dim() != m.dim() {
        return Err(ModalError::dimension(
            m.dim(),
            state.dim(),
            "born probabilities",
        ));
    }
    let probs = match &m.repr {
        MeasureRepr::Basis(b) => {
            let coeffs = b.dagger_matvec(state.amplitudes());
            coeffs.iter().map(|c| c.norm_sqr()).collect::<Vec<f64>>()
        }
        MeasureRepr::Dense(elements) => elements
            .iter()
            .map(|e| {
                let ev = e.matvec(state.amplitudes());
                linalg::vdot(state.amplitudes(), &ev).re
            })
            .collect(),
    };
    Ok(probs.into_iter().map(|p| p.clamp(0.0, 1.0)).collect())
}

/// Cached eigendecomposition of a Hamiltonian, reused across time samples.
#[derive(Debug, Clone)]
pub struct Propagator {
    eig: Eigh,
}

impl Propagator {
    pub fn new(h: &HermitianOperator) -> Result<Self> {
        Ok(Propagator {
            eig: linalg::eigh(h.matrix())?,
        })
    }

    pub fn dim(&self) -> usize {
        self.eig.values.len()
    }

    /// `exp(-iHt)` applied to raw amplitudes.
    pub fn apply(&self, amplitudes: &[C64], t: f64) -> Vec<C64> {
        self.eig
            .apply_fn(|lam| C64::from_polar(1.0, -lam * t), amplitudes)
    }

    pub fn evolve(&self, state: &PureState, t: f64) -> Result<PureState> {
        PureState::new(self.apply(state.amplitudes(), t))
    }

    /// Dense unitary `exp(-iHt)`.
    pub fn unitary(&self, t: f64) -> CMatrix {
        self.eig.matrix_fn(|lam| C64::from_polar(1.0, -lam * t))
    }
}

/// Evolve under a time-independent Hamiltonian: `exp(-iHt)|Ψ⟩`.
pub fn evolve_schrodinger(state: &PureState, h: &HermitianOperator, t: f64) -> Result<PureState> {
    if state.dim() != h.dim() {
        return Err(ModalError::dimension(h.dim(), state.dim(), "evolve"));
    }
    Propagator::new(h)?.evolve(state, t)
}

/// Tensor product of states with the `(uni, aux)` row-major convention.
pub fn tensor_states(a: &PureState, b: &PureState) -> PureState {
    PureState {
        amplitudes: linalg::vkron(a.amplitudes(), b.amplitudes()),
        label: None,
    }
}

/// Tensor product of Hermitian operators.
pub fn tensor_operators(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator {
        matrix: a.matrix().kron(b.matrix()),
    }
}

/// State constructors on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    /// Number state `|n⟩`.
    Fock(usize),
    /// Coherent state `|β⟩`.
    Coherent(C64),
    /// Truncated, renormalized position sample `Σ_m ⟨m|x⟩ |m⟩`.
    PositionSample(f64),
}

/// Build a state on a Fock space truncated at `dim` levels.
///
/// Coherent states demand `|β|² + 6|β| < dim` so the discarded tail is
/// negligible; the renormalization correction is checked against
/// `TRUNC_TOL`. Position samples are renormalized without a tail check
/// (the untruncated vector is delta-normalized).
pub fn make_state(spec: &StateSpec, dim: usize) -> Result<PureState> {
    assert!(dim > 0);
    match spec {
        StateSpec::Fock(n) => {
            if *n >= dim {
                return Err(ModalError::Truncation {
                    dim,
                    tail: 1.0,
                    limit: tol::TRUNC_TOL,
                });
            }
            Ok(PureState::basis(dim, *n).with_label(format!("fock({n})")))
        }
        StateSpec::Coherent(beta) => {
            let b = beta.norm();
            if b * b + 6.0 * b >= dim as f64 {
                return Err(ModalError::Truncation {
                    dim,
                    tail: f64::NAN,
                    limit: tol::TRUNC_TOL,
                });
            }
            let mut amps = Vec::with_capacity(dim);
            let mut c = C64::new((-b * b / 2.0).exp(), 0.0);
            amps.push(c);
            for m in 1..dim {
                c *= beta / C64::new((m as f64).sqrt(), 0.0);
                amps.push(c);
            }
            let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            let tail = 1.0 - norm2;
            if tail >= tol::TRUNC_TOL {
                return Err(ModalError::Truncation {
                    dim,
                    tail,
                    limit: tol::TRUNC_TOL,
                });
            }
            let s = C64::new(1.0 / norm2.sqrt(), 0.0);
            Ok(PureState {
                amplitudes: linalg::vscale(&amps, s),
                label: Some(format!("coherent({beta})")),
            })
        }
        StateSpec::PositionSample(x) => {
            let phi = position_amplitudes(*x, dim);
            let norm: f64 = phi.iter().map(|v| v * v).sum::<f64>();
            if norm == 0.0 {
                return Err(ModalError::Truncation {
                    dim,
                    tail: 1.0,
                    limit: tol::TRUNC_TOL,
                });
            }
            let s = 1.0 / norm.sqrt();
            Ok(PureState {
                amplitudes: phi.iter().map(|v| C64::new(v * s, 0.0)).collect(),
                label: Some(format!("position({x})")),
            })
        }
    }
}

/// Harmonic-oscillator position amplitudes `⟨x|m⟩` for `m < dim`
/// (Hermite functions, unit mass and frequency, ħ = 1).
pub fn position_amplitudes(x: f64, dim: usize) -> Vec<f64> {
    let mut phi = Vec::with_capacity(dim);
    let phi0 = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    phi.push(phi0);
    if dim > 1 {
        phi.push(std::f64::consts::SQRT_2 * x * phi0);
    }
    for m in 1..dim.saturating_sub(1) {
        let mf = m as f64;
        let next = (2.0 / (mf + 1.0)).sqrt() * x * phi[m] - (mf / (mf + 1.0)).sqrt() * phi[m - 1];
        phi.push(next);
    }
    phi
}

/// Derivatives `∂_x ⟨x|m⟩ = √(2m) ⟨x|m-1⟩ - x ⟨x|m⟩`.
pub fn position_amplitude_derivatives(x: f64, dim: usize) -> Vec<f64> {
    let phi = position_amplitudes(x, dim);
    (0..dim)
        .map(|m| {
            let lower = if m == 0 {
                0.0
            } else {
                (2.0 * m as f64).sqrt() * phi[m - 1]
            };
            lower - x * phi[m]
        })
        .collect()
}

/// Annihilation operator on a truncated Fock space.
pub fn annihilation(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn creation(dim: usize) -> CMatrix {
    annihilation(dim).dagger()
}

/// Number operator `a†a`.
pub fn number_operator(dim: usize) -> HermitianOperator {
    HermitianOperator {
        matrix: CMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                C64::new(i as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }),
    }
}

/// Position quadrature `X = (a + a†)/√2`.
pub fn position_operator(dim: usize) -> HermitianOperator {
    let a = annihilation(dim);
    HermitianOperator {
        matrix: a.add(&a.dagger()).scale(C64::new(1.0 / 2f64.sqrt(), 0.0)),
    }
}

/// Momentum quadrature `Y = i(a† - a)/√2`.
pub fn momentum_operator(dim: usize) -> HermitianOperator {
    let a = annihilation(dim);
    HermitianOperator {
        matrix: a.dagger().sub(&a).scale(C64::new(0.0, 1.0 / 2f64.sqrt())),
    }
}

/// Oscillator Hamiltonian `ω a†a`.
pub fn harmonic_hamiltonian(omega: f64, dim: usize) -> HermitianOperator {
    HermitianOperator {
        matrix: number_operator(dim).matrix().scale(C64::new(omega, 0.0)),
    }
}

/// Pauli matrices on dimension 2.
pub fn pauli_x() -> HermitianOperator {
    HermitianOperator {
        matrix: CMatrix::from_rows(vec![
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        ]),
    }
}

pub fn pauli_y() -> HermitianOperator {
    HermitianOperator {
        matrix: CMatrix::from_rows(vec![
            vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
            vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
        ]),
    }
}

pub fn pauli_z() -> HermitianOperator {
    HermitianOperator {
        matrix: CMatrix::from_rows(vec![
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            vec![C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
        ]),
    }
}
