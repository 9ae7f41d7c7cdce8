//! Dense complex linear algebra: matrices, Kronecker products, and Hermitian
//! eigendecompositions.
//!
//! Everything here is plain row-major `Vec<Complex64>` double precision. The
//! problem sizes in this crate stay below a few thousand, so a cyclic Jacobi
//! eigensolver (general Hermitian) and an implicit-shift QL solver (real
//! symmetric tridiagonal) cover all needs without an external LAPACK binding.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{ModalError, Result};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        CMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Rank-1 projector `|v⟩⟨v|`.
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn dagger(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == C64::new(0.0, 0.0) {
                    continue;
                }
                let orow = k * other.cols;
                let trow = i * other.cols;
                for j in 0..other.cols {
                    out.data[trow + j] += aik * other.data[orow + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = C64::new(0.0, 0.0);
            for (a, x) in row.iter().zip(v) {
                acc += a * x;
            }
            out[i] = acc;
        }
        out
    }

    /// `A† v` without forming the adjoint.
    pub fn dagger_matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, v.len(), "dagger_matvec shape mismatch");
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * vi;
            }
        }
        out
    }

    /// Kronecker product with row-major index convention
    /// `(i_a, i_b) ↦ i_a * b.rows + i_b`.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let aij = self.get(i, j);
                if aij == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(
                            i * other.rows + k,
                            j * other.cols + l,
                            aij * other.get(k, l),
                        );
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max_{ij} |A_ij - (A†)_ij|`.
    pub fn hermiticity_residual(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                let r = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(r);
            }
        }
        worst
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Conjugating inner product `⟨a|b⟩ = Σ ā_i b_i`.
pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vscale(a: &[C64], s: C64) -> Vec<C64> {
    a.iter().map(|x| x * s).collect()
}

/// Kronecker product of vectors with the `(uni, aux)` row-major convention.
pub fn vkron(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

/// Hermitian eigendecomposition `A = V diag(λ) V†`, eigenvalues ascending,
/// eigenvectors in the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    /// Unitary function of the matrix: `V diag(f(λ)) V†` applied to `v`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64, v: &[C64]) -> Vec<C64> {
        let mut w = self.vectors.dagger_matvec(v);
        for (wi, &lam) in w.iter_mut().zip(&self.values) {
            *wi *= f(lam);
        }
        self.vectors.matvec(&w)
    }

    /// Dense matrix `V diag(f(λ)) V†`.
    pub fn matrix_fn(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                let v = scaled.get(i, j) * fj;
                scaled.set(i, j, v);
            }
        }
        scaled.matmul(&self.vectors.dagger())
    }
}

const MAX_JACOBI_SWEEPS: usize = 60;

/// Cyclic Jacobi eigensolver for Hermitian matrices. Real symmetric
/// tridiagonal inputs (lattice Hamiltonians, quadrature operators) are
/// detected and routed to the much faster QL solver.
///
/// Accuracy is machine precision per rotation; convergence is quadratic in
/// the off-diagonal norm. Intended for the moderate dimensions used here.
pub fn eigh(a: &CMatrix) -> Result<Eigh> {
    assert!(a.is_square(), "eigh requires a square matrix");
    let n = a.rows();
    let herm = a.hermiticity_residual();
    let scale = a.max_abs().max(1e-300);
    if herm > crate::tol::HERM_TOL * scale.max(1.0) {
        return Err(ModalError::Hermiticity { residual: herm });
    }
    if let Some((diag, off)) = as_real_tridiagonal(a) {
        let (values, vecs) = eigh_tridiagonal(&diag, &off)?;
        let vectors = CMatrix {
            rows: n,
            cols: n,
            data: vecs.iter().map(|&v| C64::new(v, 0.0)).collect(),
        };
        return Ok(Eigh { values, vectors });
    }
    eigh_jacobi(a)
}

/// Cyclic Jacobi sweep loop; assumes hermiticity was already checked.
pub(crate) fn eigh_jacobi(a: &CMatrix) -> Result<Eigh> {
    let n = a.rows();
    let mut w = a.clone();
    // Symmetrize to kill representation noise below HERM_TOL.
    for p in 0..n {
        let wpp = w.get(p, p);
        w.set(p, p, C64::new(wpp.re, 0.0));
        for q in (p + 1)..n {
            let avg = (w.get(p, q) + w.get(q, p).conj()) * 0.5;
            w.set(p, q, avg);
            w.set(q, p, avg.conj());
        }
    }
    let mut v = CMatrix::identity(n);
    let fro = w.frobenius().max(1e-300);
    let target = 1e-14 * fro;

    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut off2 = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off2 += w.get(p, q).norm_sqr();
            }
        }
        if (2.0 * off2).sqrt() <= target {
            let mut values: Vec<f64> = (0..n).map(|i| w.get(i, i).re).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
            values = order.iter().map(|&i| w.get(i, i).re).collect();
            let vectors = CMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
            return Ok(Eigh { values, vectors });
        }
        let skip = target / (n as f64);
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w.get(p, q);
                let r = apq.norm();
                if r <= skip {
                    continue;
                }
                let app = w.get(p, p).re;
                let aqq = w.get(q, q).re;
                let omega = apq / r;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let s_omega = omega * s;
                let s_omega_c = omega.conj() * s;
                // A ← G† A G with G mixing columns/rows p and q.
                for k in 0..n {
                    let akp = w.get(k, p);
                    let akq = w.get(k, q);
                    w.set(k, p, akp * c - akq * s_omega_c);
                    w.set(k, q, akp * s + akq * (omega.conj() * c));
                }
                for k in 0..n {
                    let apk = w.get(p, k);
                    let aqk = w.get(q, k);
                    w.set(p, k, apk * c - aqk * s_omega);
                    w.set(q, k, apk * s + aqk * (omega * c));
                }
                // Re-pin the rotated pair to exact Hermitian form.
                let dpp = w.get(p, p);
                let dqq = w.get(q, q);
                w.set(p, p, C64::new(dpp.re, 0.0));
                w.set(q, q, C64::new(dqq.re, 0.0));
                let avg = (w.get(p, q) + w.get(q, p).conj()) * 0.5;
                w.set(p, q, avg);
                w.set(q, p, avg.conj());
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c - vkq * s_omega_c);
                    v.set(k, q, vkp * s + vkq * (omega.conj() * c));
                }
            }
        }
    }
    Err(ModalError::NoConvergence(format!(
        "Jacobi eigensolver, dim {n}"
    )))
}

/// Detect an exactly real, symmetric, tridiagonal matrix.
fn as_real_tridiagonal(a: &CMatrix) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = a.rows();
    if n < 3 {
        return None;
    }
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n - 1);
    for i in 0..n {
        let d = a.get(i, i);
        if d.im != 0.0 {
            return None;
        }
        diag.push(d.re);
        for j in (i + 1)..n {
            let v = a.get(i, j);
            if j == i + 1 {
                if v.im != 0.0 || v != a.get(j, i) {
                    return None;
                }
                off.push(v.re);
            } else if v != C64::new(0.0, 0.0) || a.get(j, i) != C64::new(0.0, 0.0) {
                return None;
            }
        }
    }
    Some((diag, off))
}

/// Implicit-shift QL eigendecomposition of a real symmetric tridiagonal
/// matrix with diagonal `diag` and subdiagonal `offdiag`
/// (`offdiag[i]` couples `i` and `i+1`).
///
/// Returns eigenvalues ascending and the real eigenvector matrix row-major,
/// columns matching eigenvalues.
pub fn eigh_tridiagonal(diag: &[f64], offdiag: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    assert_eq!(offdiag.len(), n.saturating_sub(1));
    let mut d = diag.to_vec();
    let mut e = vec![0.0f64; n];
    e[..n - 1].copy_from_slice(offdiag);
    let mut z = vec![0.0f64; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(ModalError::NoConvergence(format!(
                    "tridiagonal QL, dim {n}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = vec![0.0f64; n * n];
    for (jnew, &jold) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + jnew] = z[i * n + jold];
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand::RngExt;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = derive_rng(seed, 0);
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C64::new(rng.random::<f64>() - 0.5, 0.0));
            for j in (i + 1)..n {
                let v = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                m.set(i, j, v);
                m.set(j, i, v.conj());
            }
        }
        m
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        for n in [2usize, 3, 5, 8, 17] {
            let a = random_hermitian(n, 11 + n as u64);
            let eig = eigh(&a).unwrap();
            let rebuilt = eig.matrix_fn(|lam| C64::new(lam, 0.0));
            assert!(
                rebuilt.max_abs_diff(&a) < 1e-12 * a.max_abs().max(1.0),
                "reconstruction failed at dim {n}"
            );
            let vtv = eig.vectors.dagger().matmul(&eig.vectors);
            assert!(vtv.max_abs_diff(&CMatrix::identity(n)) < 1e-12);
            for w in eig.values.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let mut a = CMatrix::identity(2);
        a.set(0, 1, C64::new(0.3, 0.0));
        assert!(matches!(eigh(&a), Err(ModalError::Hermiticity { .. })));
    }

    #[test]
    fn tridiagonal_matches_jacobi() {
        let n = 24;
        let mut rng = derive_rng(3, 0);
        let diag: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let off: Vec<f64> = (0..n - 1).map(|_| rng.random::<f64>() - 0.5).collect();
        let dense = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else if i + 1 == j || j + 1 == i {
                C64::new(off[i.min(j)], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let (vals_ql, vecs_ql) = eigh_tridiagonal(&diag, &off).unwrap();
        let eig = eigh_jacobi(&dense).unwrap();
        for (a, b) in vals_ql.iter().zip(&eig.values) {
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
        // Eigenvector check: A v = λ v for the QL vectors.
        for j in 0..n {
            let v: Vec<C64> = (0..n).map(|i| C64::new(vecs_ql[i * n + j], 0.0)).collect();
            let av = dense.matvec(&v);
            for i in 0..n {
                assert!((av[i] - v[i] * vals_ql[j]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn json_fixture_format_is_row_major_re_im_pairs() {
        let m = CMatrix::from_rows(vec![
            vec![C64::new(1.0, 2.0), C64::new(3.0, -4.0)],
            vec![C64::new(0.0, 0.0), C64::new(5.0, 6.0)],
        ]);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(
            json,
            r#"{"rows":2,"cols":2,"data":[[1.0,2.0],[3.0,-4.0],[0.0,0.0],[5.0,6.0]]}"#
        );
        let back: CMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn kron_index_convention() {
        // (uni ⊗ aux): basis (i_a, i_b) ↦ i_a * dim_b + i_b.
        let a = CMatrix::from_fn(2, 2, |i, j| C64::new((10 * i + j) as f64, 0.0));
        let b = CMatrix::identity(3);
        let k = a.kron(&b);
        assert_eq!(k.get(0 * 3 + 1, 1 * 3 + 1), a.get(0, 1));
        assert_eq!(k.get(0 * 3 + 1, 1 * 3 + 2), C64::new(0.0, 0.0));
    }
}
