//! Density matrices, Bloch-parametrized pure qubits, and ergotropy.
//!
//! Sign convention: `σz|0⟩ = |0⟩` and qubit Hamiltonians are `H = -ω σz / 2`,
//! so `|0⟩` is the ground state (energy `-ω/2`) and `|1⟩` is fully charged.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::qmath::{c, eig_hermitian, CMatrix, C64};

/// Validation tolerance for density matrices.
pub const STATE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity, each within [`STATE_TOL`].
    pub fn new(mat: CMatrix) -> Result<Self> {
        if !mat.is_finite() {
            return Err(Error::StateInvalid("non-finite entries".into()));
        }
        let herm = mat.hermiticity_deviation();
        if herm > STATE_TOL {
            return Err(Error::StateInvalid(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = mat.trace();
        if (tr - c(1.0, 0.0)).norm() > STATE_TOL {
            return Err(Error::StateInvalid(format!("trace {tr} != 1")));
        }
        let sym = (mat + mat.adjoint()).scale_real(0.5);
        let min_eig = eig_hermitian(&sym)?.values[0];
        if min_eig < -STATE_TOL {
            return Err(Error::StateInvalid(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(DensityMatrix { mat })
    }

    /// Wraps a matrix that is a valid state by construction (e.g. the output
    /// of a CPTP map applied to a valid state).
    pub(crate) fn new_unchecked(mat: CMatrix) -> Self {
        DensityMatrix { mat }
    }

    pub fn from_ket(ket: &[C64]) -> Result<Self> {
        let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::StateInvalid("zero or non-finite ket".into()));
        }
        let unit: Vec<C64> = ket.iter().map(|z| z / norm).collect();
        Ok(DensityMatrix { mat: CMatrix::outer(&unit) })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { mat: CMatrix::identity(dim).scale_real(1.0 / dim as f64) }
    }

    /// `|k⟩⟨k|` in the computational basis.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(dim);
        m[(k, k)] = c(1.0, 0.0);
        DensityMatrix { mat: m }
    }

    /// `|±⟩⟨±|` with `|±⟩ = (|0⟩ ± |1⟩)/√2`.
    pub fn plus() -> Self {
        DensityMatrix { mat: CMatrix::from_fn(2, |_, _| c(0.5, 0.0)) }
    }

    pub fn minus() -> Self {
        DensityMatrix { mat: CMatrix::from_fn(2, |i, j| c(if i == j { 0.5 } else { -0.5 }, 0.0)) }
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    /// Real part of `tr(ρ O)`.
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        self.mat.trace_product(op).re
    }

    pub fn purity(&self) -> f64 {
        self.mat.trace_product(&self.mat).re
    }

    /// `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`. Panics for non-qubit states.
    pub fn bloch_vector(&self) -> [f64; 3] {
        assert_eq!(self.dim(), 2);
        let off = self.mat[(0, 1)];
        [2.0 * off.re, -2.0 * off.im, self.mat[(0, 0)].re - self.mat[(1, 1)].re]
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.mat.max_abs_diff(&other.mat)
    }
}

/// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PureQubit {
    pub theta: f64,
    pub phi: f64,
}

impl PureQubit {
    /// `theta` must lie in `[0, π]`; `phi` is wrapped into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::StateInvalid(format!("Bloch angles out of range: θ={theta}, φ={phi}")));
        }
        Ok(PureQubit { theta, phi: phi.rem_euclid(TAU) })
    }

    pub fn ground() -> Self {
        PureQubit { theta: 0.0, phi: 0.0 }
    }

    pub fn excited() -> Self {
        PureQubit { theta: PI, phi: 0.0 }
    }

    pub fn ket(&self) -> [C64; 2] {
        let (s, cth) = (self.theta / 2.0).sin_cos();
        [c(cth, 0.0), C64::from_polar(s, self.phi)]
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(CMatrix::outer(&self.ket()))
    }
}

/// `H = -(ω/2) σz`; ground state `|0⟩` at energy `-ω/2` for `ω > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitHamiltonian {
    pub omega: f64,
}

impl QubitHamiltonian {
    pub fn new(omega: f64) -> Self {
        QubitHamiltonian { omega }
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_real_diag(&[-self.omega / 2.0, self.omega / 2.0])
    }

    pub fn ground_energy(&self) -> f64 {
        -self.omega.abs() / 2.0
    }
}

fn check_dims(rho: &DensityMatrix, h: &CMatrix) -> Result<()> {
    if rho.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: h.dim() });
    }
    Ok(())
}

/// Energy of the passive state: `Σ_k λ↓_k ε↑_k`.
pub fn passive_energy(rho: &DensityMatrix, h: &CMatrix) -> Result<f64> {
    check_dims(rho, h)?;
    let pops = eig_hermitian(rho.matrix())?.values;
    let levels = eig_hermitian(h)?.values;
    Ok(pops.iter().rev().zip(&levels).map(|(p, e)| p * e).sum())
}

/// Maximum work extractable from `rho` by a unitary, `tr(ρH) - min_V tr(VρV†H)`.
///
/// The minimum is attained by the passive state, so no optimization is run.
/// Results in `[-1e-10, 0)` are returned as exactly `0`.
pub fn ergotropy(rho: &DensityMatrix, h: &CMatrix) -> Result<f64> {
    check_dims(rho, h)?;
    let w = rho.expectation(h) - passive_energy(rho, h)?;
    Ok(if (-STATE_TOL..0.0).contains(&w) { 0.0 } else { w })
}

/// `ω sin²(θ/2)`.
pub fn ergotropy_pure(psi: &PureQubit, omega: f64) -> f64 {
    omega * (psi.theta / 2.0).sin().powi(2)
}

/// Eigenvalues of `rho` in descending order placed on the eigenstates of `h`
/// in ascending energy.
pub fn passive_state(rho: &DensityMatrix, h: &CMatrix) -> Result<DensityMatrix> {
    check_dims(rho, h)?;
    let pops = eig_hermitian(rho.matrix())?.values;
    let levels = eig_hermitian(h)?;
    let mut out = CMatrix::zeros(rho.dim());
    for (k, p) in pops.iter().rev().enumerate() {
        out = out + CMatrix::outer(&levels.eigenvector(k)).scale_real(*p);
    }
    Ok(DensityMatrix::new_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    const OMEGA: f64 = 1.3;

    fn h_a() -> CMatrix {
        QubitHamiltonian::new(OMEGA).matrix()
    }

    fn bloch_state(r: [f64; 3]) -> DensityMatrix {
        DensityMatrix::new(
            CMatrix::from_rows(&[
                &[c((1.0 + r[2]) / 2.0, 0.0), c(r[0] / 2.0, -r[1] / 2.0)],
                &[c(r[0] / 2.0, r[1] / 2.0), c((1.0 - r[2]) / 2.0, 0.0)],
            ])
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn excited_state_holds_full_gap() {
        let w = ergotropy(&DensityMatrix::basis(2, 1), &h_a()).unwrap();
        assert!((w - OMEGA).abs() < 1e-15);
    }

    #[test]
    fn maximally_mixed_is_passive() {
        assert_eq!(ergotropy(&DensityMatrix::maximally_mixed(2), &h_a()).unwrap(), 0.0);
        let h4 = CMatrix::from_real_diag(&[-1.0, 0.2, 0.5, 3.0]);
        assert_eq!(ergotropy(&DensityMatrix::maximally_mixed(4), &h4).unwrap(), 0.0);
    }

    #[test]
    fn bloch_formula() {
        for r in [[1.0, 0.0, 0.0], [0.3, -0.2, 0.5], [0.0, 0.0, -0.9], [0.1, 0.6, -0.4]] {
            let rho = bloch_state(r);
            let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            let expected = OMEGA * (norm - r[2]) / 2.0;
            assert!((ergotropy(&rho, &h_a()).unwrap() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = ergotropy(&DensityMatrix::maximally_mixed(4), &h_a()).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 4, got: 2 });
        assert!(passive_state(&DensityMatrix::maximally_mixed(2), &CMatrix::identity(4)).is_err());
    }

    #[test]
    fn pure_formula_edge_cases() {
        assert_eq!(ergotropy_pure(&PureQubit::ground(), OMEGA), 0.0);
        assert!((ergotropy_pure(&PureQubit::excited(), OMEGA) - OMEGA).abs() < 1e-15);
        let eq = PureQubit::new(FRAC_PI_2, 0.0).unwrap();
        assert!((ergotropy_pure(&eq, OMEGA) - OMEGA / 2.0).abs() < 1e-15);
        assert!((ergotropy(&eq.to_density(), &h_a()).unwrap() - OMEGA / 2.0).abs() < 1e-15);
    }

    #[test]
    fn passive_state_examples() {
        let p = passive_state(&DensityMatrix::basis(2, 1), &h_a()).unwrap();
        assert!(p.max_abs_diff(&DensityMatrix::basis(2, 0)) < 1e-15);
        let mm = DensityMatrix::maximally_mixed(2);
        assert!(passive_state(&mm, &h_a()).unwrap().max_abs_diff(&mm) < 1e-15);
    }

    #[test]
    fn to_density_examples() {
        assert!(PureQubit::ground().to_density().max_abs_diff(&DensityMatrix::basis(2, 0)) < 1e-15);
        for phi in [0.0, 1.0, 4.0] {
            let psi = PureQubit::new(PI, phi).unwrap();
            assert!(psi.to_density().max_abs_diff(&DensityMatrix::basis(2, 1)) < 1e-15);
        }
        let plus = PureQubit::new(FRAC_PI_2, 0.0).unwrap().to_density();
        assert!(plus.max_abs_diff(&DensityMatrix::plus()) < 1e-15);
    }

    #[test]
    fn invalid_states_rejected() {
        let not_unit = CMatrix::from_real_diag(&[0.7, 0.7]);
        assert!(DensityMatrix::new(not_unit).is_err());
        let negative = CMatrix::from_real_diag(&[1.2, -0.2]);
        assert!(DensityMatrix::new(negative).is_err());
        assert!(PureQubit::new(-0.1, 0.0).is_err());
        assert!(PureQubit::new(4.0, 0.0).is_err());
        assert!((PureQubit::new(1.0, -1.0).unwrap().phi - (TAU - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn sign_convention() {
        let h = QubitHamiltonian::new(OMEGA);
        let g = DensityMatrix::basis(2, 0);
        assert!((g.expectation(&h.matrix()) - h.ground_energy()).abs() < 1e-15);
    }
}
