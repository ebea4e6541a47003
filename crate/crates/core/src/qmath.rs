//! Dense complex linear algebra for qubits and qubit pairs.
//!
//! Every operator in the engine is a 2x2 or 4x4 complex matrix, so [`CMatrix`]
//! stores its entries inline (row-major, stride = `dim`) and is `Copy`.
//!
//! Composite system-ancilla operators use system-major ordering: the basis
//! state `|s⟩⊗|a⟩` has index `s * 2 + a` (see [`composite_index`]). `kron`
//! puts its first argument on the system factor and `ptrace` assumes the
//! same layout.
//!
//! Tolerances in this module are maximum-entry absolute deviations.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used for algebraic identities (Hermiticity, unitarity).
pub const ALGEBRA_TOL: f64 = 1e-12;

const MAX_DIM: usize = 4;
const MAX_SWEEPS: usize = 64;

#[inline]
pub const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Index of `|s⟩⊗|a⟩` in a two-qubit composite with the system factor first.
#[inline]
pub const fn composite_index(system: usize, ancilla: usize) -> usize {
    system * 2 + ancilla
}

/// Which factor of a system-ancilla pair survives a partial trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    System,
    Ancilla,
}

#[derive(Clone, Copy, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: [C64; MAX_DIM * MAX_DIM],
}

impl CMatrix {
    /// Panics unless `dim` is 2 or 4.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 4, "CMatrix supports dim 2 or 4, got {dim}");
        CMatrix { dim, data: [C64::new(0.0, 0.0); MAX_DIM * MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = c(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row slices. All rows must have the same length as
    /// the number of rows.
    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let dim = rows.len();
        if dim != 2 && dim != 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: dim });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = c(d, 0.0);
        }
        m
    }

    /// `|v⟩⟨v|` for a ket `v` of length 2 or 4.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    pub fn scale(&self, k: C64) -> Self {
        let mut out = *self;
        out.data.iter_mut().for_each(|z| *z *= k);
        out
    }

    pub fn scale_real(&self, k: f64) -> Self {
        self.scale(c(k, 0.0))
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &CMatrix) -> C64 {
        self.check_same_dim(other);
        let d = self.dim;
        let mut acc = c(0.0, 0.0);
        for i in 0..d {
            for k in 0..d {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    /// `self · m · self†`.
    pub fn conjugate(&self, m: &CMatrix) -> CMatrix {
        *self * *m * self.adjoint()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.check_same_dim(other);
        (*self - *other).max_abs()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn unitarity_deviation(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Self::identity(self.dim))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn entries(&self) -> &[C64] {
        &self.data[..self.dim * self.dim]
    }

    fn check_same_dim(&self, other: &CMatrix) {
        assert_eq!(self.dim, other.dim, "dimension mismatch: {} vs {}", self.dim, other.dim);
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.dim && j < self.dim);
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.dim && j < self.dim);
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: CMatrix) -> CMatrix {
        self.check_same_dim(&rhs);
        let d = self.dim;
        let mut out = CMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for CMatrix {
    type Output = CMatrix;

    fn add(mut self, rhs: CMatrix) -> CMatrix {
        self.check_same_dim(&rhs);
        let n = self.dim * self.dim;
        for (a, b) in self.data[..n].iter_mut().zip(&rhs.data[..n]) {
            *a += b;
        }
        self
    }
}

impl Sub for CMatrix {
    type Output = CMatrix;

    fn sub(mut self, rhs: CMatrix) -> CMatrix {
        self.check_same_dim(&rhs);
        let n = self.dim * self.dim;
        for (a, b) in self.data[..n].iter_mut().zip(&rhs.data[..n]) {
            *a -= b;
        }
        self
    }
}

impl Neg for CMatrix {
    type Output = CMatrix;

    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Pauli operators and ladder operators in the basis where `σz|0⟩ = |0⟩`.
pub mod pauli {
    use super::{c, CMatrix};

    pub fn x() -> CMatrix {
        CMatrix::from_fn(2, |i, j| if i != j { c(1.0, 0.0) } else { c(0.0, 0.0) })
    }

    pub fn y() -> CMatrix {
        let mut m = CMatrix::zeros(2);
        m[(0, 1)] = c(0.0, -1.0);
        m[(1, 0)] = c(0.0, 1.0);
        m
    }

    pub fn z() -> CMatrix {
        CMatrix::from_real_diag(&[1.0, -1.0])
    }

    /// `|0⟩⟨1|`: moves population from `|1⟩` down to the ground state `|0⟩`.
    ///
    /// With `H = -ω σz / 2` the ground state is `|0⟩`, so this is the jump
    /// operator of a zero-temperature bath even though it is written σ₊.
    pub fn sigma_plus() -> CMatrix {
        let mut m = CMatrix::zeros(2);
        m[(0, 1)] = c(1.0, 0.0);
        m
    }
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    /// Ascending.
    pub values: Vec<f64>,
    /// Unitary; column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl EigenSystem {
    pub fn reconstruct(&self) -> CMatrix {
        let d = CMatrix::from_real_diag(&self.values);
        self.vectors * d * self.vectors.adjoint()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.dim()).map(|i| self.vectors[(i, k)]).collect()
    }
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn eig_hermitian(m: &CMatrix) -> Result<EigenSystem> {
    let deviation = m.hermiticity_deviation();
    if !(deviation <= ALGEBRA_TOL) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(jacobi(m))
}

fn jacobi(m: &CMatrix) -> EigenSystem {
    let n = m.dim();
    // Symmetrize so the off-diagonal pairs are exact conjugates.
    let mut a = (*m + m.adjoint()).scale_real(0.5);
    let mut v = CMatrix::identity(n);
    let scale = a.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n).flat_map(|p| ((p + 1)..n).map(move |q| (p, q))).map(|(p, q)| a[(p, q)].norm_sqr()).sum();
        if off == 0.0 || off.sqrt() <= 1e-18 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = CMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    EigenSystem { values, vectors }
}

/// One Jacobi rotation `A ← G†AG`, `V ← VG` annihilating `A[p][q]`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r < 1e-300 {
        return;
    }
    let phase = apq / r;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    let sn = t * cs;

    // G = diag(1, e^{-iα}) · [[c, s], [-s, c]] on the (p, q) plane.
    let g_pp = c(cs, 0.0);
    let g_pq = c(sn, 0.0);
    let g_qp = phase.conj() * (-sn);
    let g_qq = phase.conj() * cs;

    let n = a.dim();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * g_pp + akq * g_qp;
        a[(k, q)] = akp * g_pq + akq * g_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
        a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
    }
    a[(p, q)] = c(0.0, 0.0);
    a[(q, p)] = c(0.0, 0.0);
    a[(p, p)] = c(a[(p, p)].re, 0.0);
    a[(q, q)] = c(a[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * g_pp + vkq * g_qp;
        v[(k, q)] = vkp * g_pq + vkq * g_qq;
    }
}

/// `exp(-i h t)` for Hermitian `h`, built from its eigendecomposition.
pub fn expm_i(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let eig = eig_hermitian(h)?;
    let n = h.dim();
    let phases: Vec<C64> = eig.values.iter().map(|&l| C64::from_polar(1.0, -l * t)).collect();
    let v = eig.vectors;
    Ok(CMatrix::from_fn(n, |i, j| (0..n).map(|k| v[(i, k)] * phases[k] * v[(j, k)].conj()).sum()))
}

/// Kronecker product `a ⊗ b` of two qubit operators, `a` on the system factor.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert!(a.dim() == 2 && b.dim() == 2, "kron is defined for qubit factors only");
    CMatrix::from_fn(4, |i, j| {
        let (si, ai) = (i / 2, i % 2);
        let (sj, aj) = (j / 2, j % 2);
        a[(si, sj)] * b[(ai, aj)]
    })
}

/// Partial trace of a 4x4 system-ancilla operator, keeping `keep`.
pub fn ptrace(m: &CMatrix, keep: Subsystem) -> CMatrix {
    assert_eq!(m.dim(), 4, "ptrace expects a two-qubit operator");
    CMatrix::from_fn(2, |i, j| {
        (0..2)
            .map(|k| match keep {
                Subsystem::System => m[(composite_index(i, k), composite_index(j, k))],
                Subsystem::Ancilla => m[(composite_index(k, i), composite_index(k, j))],
            })
            .sum()
    })
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    *a * *b - *b * *a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    *a * *b + *b * *a
}
