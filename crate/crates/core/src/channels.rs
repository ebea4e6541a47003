//! Physical primitives of one collision: the system-ancilla unitary, the
//! system measurement, the conditional pulse on the ancilla, and the
//! dissipative reset of the system between collisions.

use crate::error::{Error, Result};
use crate::qmath::{anticommutator, c, commutator, eig_hermitian, expm_i, kron, pauli, ptrace};
use crate::qmath::{CMatrix, Subsystem, ALGEBRA_TOL};
use crate::states::{DensityMatrix, QubitHamiltonian};

/// Branches with probability below this are never normalized or sampled.
pub const ZERO_BRANCH_TOL: f64 = 1e-14;

/// Interaction `H_SA = g σy ⊗ σz` switched on for `tau_sa`.
///
/// Only the product `g * tau_sa` enters the dynamics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionParams {
    pub g: f64,
    pub tau_sa: f64,
}

impl CollisionParams {
    pub fn new(g: f64, tau_sa: f64) -> Result<Self> {
        if !(g * tau_sa).is_finite() {
            return Err(Error::InvalidConfig(format!("g·τ_SA must be finite (g={g}, τ_SA={tau_sa})")));
        }
        Ok(CollisionParams { g, tau_sa })
    }

    /// Coupling with unit interaction time.
    pub fn from_g_tau(g_tau: f64) -> Result<Self> {
        Self::new(g_tau, 1.0)
    }

    pub fn g_tau(&self) -> f64 {
        self.g * self.tau_sa
    }

    pub fn generator(&self) -> CMatrix {
        kron(&pauli::y(), &pauli::z()).scale_real(self.g)
    }

    pub fn unitary(&self) -> CMatrix {
        expm_i(&self.generator(), self.tau_sa).expect("g σy⊗σz is Hermitian")
    }
}

/// `U (ρ_S ⊗ ρ_A) U†` with the collision unitary.
pub fn collide(rho_s: &DensityMatrix, rho_a: &DensityMatrix, p: &CollisionParams) -> DensityMatrix {
    collide_with(&p.unitary(), rho_s, rho_a)
}

/// [`collide`] with a precomputed unitary.
pub fn collide_with(u: &CMatrix, rho_s: &DensityMatrix, rho_a: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::new_unchecked(u.conjugate(&kron(rho_s.matrix(), rho_a.matrix())))
}

/// Generalized measurement `{M_x}` on the system qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    kraus: Vec<CMatrix>,
    labels: Vec<i8>,
}

impl Measurement {
    pub fn new(kraus: Vec<CMatrix>, labels: Vec<i8>) -> Result<Self> {
        if kraus.is_empty() || kraus.len() != labels.len() {
            return Err(Error::InvalidConfig("one label per Kraus operator required".into()));
        }
        if let Some(k) = kraus.iter().find(|k| k.dim() != 2) {
            return Err(Error::DimensionMismatch { expected: 2, got: k.dim() });
        }
        let completeness =
            kraus.iter().fold(CMatrix::zeros(2), |acc, k| acc + k.adjoint() * *k).max_abs_diff(&CMatrix::identity(2));
        if completeness > ALGEBRA_TOL {
            return Err(Error::InvalidConfig(format!("Kraus operators incomplete (deviation {completeness:e})")));
        }
        Ok(Measurement { kraus, labels })
    }

    /// Projective measurement in the `σx` eigenbasis, outcomes `+1` and `-1`.
    pub fn sigma_x() -> Self {
        Measurement {
            kraus: vec![*DensityMatrix::plus().matrix(), *DensityMatrix::minus().matrix()],
            labels: vec![1, -1],
        }
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn index_of(&self, outcome: i8) -> Option<usize> {
        self.labels.iter().position(|&l| l == outcome)
    }
}

/// One outcome of a system measurement.
///
/// `joint`, `system` and `ancilla` are normalized. `probability * joint`
/// equals the unnormalized post-measurement operator `(M_x ⊗ I) ρ (M_x ⊗ I)†`.
#[derive(Clone, Debug)]
pub struct MeasuredBranch {
    pub outcome: i8,
    pub probability: f64,
    pub joint: DensityMatrix,
    pub system: DensityMatrix,
    pub ancilla: DensityMatrix,
    /// Set when `probability < ZERO_BRANCH_TOL`. The states are then
    /// maximally mixed placeholders and must not be used.
    pub degenerate: bool,
}

impl MeasuredBranch {
    /// Errors with `ZeroProbabilityBranch` if the conditional state is undefined.
    pub fn require_defined(&self) -> Result<&Self> {
        if self.degenerate {
            return Err(Error::ZeroProbabilityBranch { outcome: self.outcome, probability: self.probability });
        }
        Ok(self)
    }
}

/// Applies every Kraus operator to the system half of `joint`.
pub fn measure(joint: &DensityMatrix, meas: &Measurement) -> Vec<MeasuredBranch> {
    let id = CMatrix::identity(2);
    meas.kraus
        .iter()
        .zip(&meas.labels)
        .map(|(k, &outcome)| {
            let unnormalized = kron(k, &id).conjugate(joint.matrix());
            let probability = unnormalized.trace().re.max(0.0);
            if probability < ZERO_BRANCH_TOL {
                return MeasuredBranch {
                    outcome,
                    probability,
                    joint: DensityMatrix::maximally_mixed(4),
                    system: DensityMatrix::maximally_mixed(2),
                    ancilla: DensityMatrix::maximally_mixed(2),
                    degenerate: true,
                };
            }
            let normalized = unnormalized.scale_real(1.0 / probability);
            MeasuredBranch {
                outcome,
                probability,
                joint: DensityMatrix::new_unchecked(normalized),
                system: DensityMatrix::new_unchecked(ptrace(&normalized, Subsystem::System)),
                ancilla: DensityMatrix::new_unchecked(ptrace(&normalized, Subsystem::Ancilla)),
                degenerate: false,
            }
        })
        .collect()
}

/// Post-measurement joint state when the outcome is not recorded.
pub fn measure_nonselective(joint: &DensityMatrix, meas: &Measurement) -> DensityMatrix {
    let id = CMatrix::identity(2);
    let sum = meas.kraus.iter().fold(CMatrix::zeros(4), |acc, k| acc + kron(k, &id).conjugate(joint.matrix()));
    DensityMatrix::new_unchecked(sum)
}

/// `O ρ O†` for a unitary pulse `O`.
pub fn apply_pulse(rho_a: &DensityMatrix, pulse: &CMatrix) -> Result<DensityMatrix> {
    if pulse.dim() != rho_a.dim() {
        return Err(Error::DimensionMismatch { expected: rho_a.dim(), got: pulse.dim() });
    }
    let deviation = pulse.unitarity_deviation();
    if deviation > ALGEBRA_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(DensityMatrix::new_unchecked(pulse.conjugate(rho_a.matrix())))
}

/// Zero-temperature relaxation of the system: `H_S = -ω_S σz / 2` with
/// decay `γ D[σ₊]` acting for `tau_se`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResetParams {
    pub gamma: f64,
    pub tau_se: f64,
    pub omega_s: f64,
}

impl ResetParams {
    pub fn new(gamma: f64, tau_se: f64, omega_s: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) || !(tau_se >= 0.0 && tau_se.is_finite()) {
            return Err(Error::InvalidConfig(format!("γ and τ_SE must be finite and ≥ 0 (γ={gamma}, τ_SE={tau_se})")));
        }
        if !omega_s.is_finite() {
            return Err(Error::InvalidConfig("ω_S must be finite".into()));
        }
        Ok(ResetParams { gamma, tau_se, omega_s })
    }

    pub fn gamma_tau(&self) -> f64 {
        self.gamma * self.tau_se
    }

    pub fn system_hamiltonian(&self) -> CMatrix {
        QubitHamiltonian::new(self.omega_s).matrix()
    }

    /// RK4 step count used when none is given: enough to resolve both the
    /// decay and the coherent rotation to well below 1e-8.
    pub fn default_steps(&self) -> usize {
        let phase = (self.gamma + self.omega_s.abs()) * self.tau_se;
        ((50.0 * phase).ceil() as usize).max(100)
    }
}

/// The two projective post-measurement system states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResetStart {
    Plus,
    Minus,
}

impl ResetStart {
    pub fn state(self) -> DensityMatrix {
        match self {
            ResetStart::Plus => DensityMatrix::plus(),
            ResetStart::Minus => DensityMatrix::minus(),
        }
    }

    pub fn from_outcome(outcome: i8) -> Option<Self> {
        match outcome {
            1 => Some(ResetStart::Plus),
            -1 => Some(ResetStart::Minus),
            _ => None,
        }
    }
}

/// Exact relaxed state after starting from `|±⟩⟨±|`:
/// populations `(1 - e^{-γτ}/2, e^{-γτ}/2)` and coherence
/// `ρ₀₁ = ±e^{-γτ/2 + iω_S τ}/2`.
pub fn reset_closed_form(start: ResetStart, p: &ResetParams) -> DensityMatrix {
    let sign = match start {
        ResetStart::Plus => 1.0,
        ResetStart::Minus => -1.0,
    };
    let decay = (-p.gamma_tau()).exp();
    let coherence = c(sign * 0.5, 0.0) * c(-p.gamma_tau() / 2.0, p.omega_s * p.tau_se).exp();
    let mut m = CMatrix::zeros(2);
    m[(0, 0)] = c(1.0 - decay / 2.0, 0.0);
    m[(1, 1)] = c(decay / 2.0, 0.0);
    m[(0, 1)] = coherence;
    m[(1, 0)] = coherence.conj();
    DensityMatrix::new_unchecked(m)
}

fn lindblad_rhs(h: &CMatrix, jump: &CMatrix, gamma: f64, rho: &CMatrix) -> CMatrix {
    let jd = jump.adjoint();
    let unitary = commutator(h, rho).scale(c(0.0, -1.0));
    let dissipator = *jump * *rho * jd - anticommutator(&(jd * *jump), rho).scale_real(0.5);
    unitary + dissipator.scale_real(gamma)
}

/// Fixed-step RK4 integration of the reset master equation over `tau_se`.
///
/// Errors with `StateInvalid` if the result has an eigenvalue below `-1e-8`,
/// which means `steps` was too coarse.
pub fn reset_numeric(rho_s: &DensityMatrix, p: &ResetParams, steps: usize) -> Result<DensityMatrix> {
    if steps < 100 {
        return Err(Error::InvalidConfig(format!("reset integration needs at least 100 steps, got {steps}")));
    }
    if rho_s.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: rho_s.dim() });
    }
    let h = p.system_hamiltonian();
    let jump = pauli::sigma_plus();
    let dt = p.tau_se / steps as f64;
    let f = |r: &CMatrix| lindblad_rhs(&h, &jump, p.gamma, r);

    let mut rho = *rho_s.matrix();
    for _ in 0..steps {
        let k1 = f(&rho);
        let k2 = f(&(rho + k1.scale_real(dt / 2.0)));
        let k3 = f(&(rho + k2.scale_real(dt / 2.0)));
        let k4 = f(&(rho + k3.scale_real(dt)));
        rho = rho + (k1 + k2.scale_real(2.0) + k3.scale_real(2.0) + k4).scale_real(dt / 6.0);
    }

    let sym = (rho + rho.adjoint()).scale_real(0.5);
    let min_eig = eig_hermitian(&sym)?.values[0];
    if min_eig < -1e-8 {
        return Err(Error::StateInvalid(format!("reset integration lost positivity (eigenvalue {min_eig:e})")));
    }
    Ok(DensityMatrix::new_unchecked(sym))
}
