//! The demon: Bayesian classification of incoming ancillas from the system
//! measurement outcome, and the choice of what to do with each one.
//!
//! The general machinery follows Bayesian decision theory: a prior over the
//! ensemble members is updated with the likelihoods `P(x|ψ_i)` and each action
//! is scored by its posterior-weighted gain `G(α|x) = Σ_i λ(α|x,ψ_i) P(ψ_i|x)`.
//! [`DecisionPolicy::ThresholdFlip`] is the operational shortcut for the qubit
//! model: pulse on `x = +1`, leave alone on `x = -1`.

use crate::channels::{apply_pulse, collide, measure, CollisionParams, Measurement};
use crate::error::{Error, Result};
use crate::qmath::CMatrix;
use crate::states::{ergotropy, ergotropy_pure, DensityMatrix, PureQubit, QubitHamiltonian};

/// Bayes denominators below this mean the observed outcome was impossible.
pub const EVIDENCE_TOL: f64 = 1e-14;
const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    DoNothing,
    ApplyPulse,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::DoNothing, Action::ApplyPulse];

    pub fn index(self) -> usize {
        match self {
            Action::DoNothing => 0,
            Action::ApplyPulse => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum AncillaPrep {
    Pure(PureQubit),
    Mixed(DensityMatrix),
}

impl AncillaPrep {
    pub fn to_density(&self) -> DensityMatrix {
        match self {
            AncillaPrep::Pure(p) => p.to_density(),
            AncillaPrep::Mixed(r) => *r,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleMember {
    pub state: AncillaPrep,
    pub weight: f64,
}

/// Where the ancillas come from: a finite list of preparations with sampling
/// weights, or Haar-uniform pure states.
#[derive(Clone, Debug, PartialEq)]
pub enum Ensemble {
    Discrete(Vec<EnsembleMember>),
    Haar,
}

impl Ensemble {
    pub fn discrete(members: Vec<(AncillaPrep, f64)>) -> Result<Self> {
        check_distribution(members.iter().map(|(_, q)| *q), "ensemble weights")?;
        Ok(Ensemble::Discrete(members.into_iter().map(|(state, weight)| EnsembleMember { state, weight }).collect()))
    }

    pub fn pure(members: Vec<(PureQubit, f64)>) -> Result<Self> {
        Self::discrete(members.into_iter().map(|(p, q)| (AncillaPrep::Pure(p), q)).collect())
    }

    pub fn members(&self) -> Option<&[EnsembleMember]> {
        match self {
            Ensemble::Discrete(m) => Some(m),
            Ensemble::Haar => None,
        }
    }
}

fn check_distribution(probs: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut sum = 0.0;
    let mut n = 0;
    for p in probs {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidConfig(format!("{what} must be finite and ≥ 0, got {p}")));
        }
        sum += p;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidConfig(format!("{what} must be nonempty")));
    }
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidConfig(format!("{what} sum to {sum}, not 1")));
    }
    Ok(())
}

/// The demon's belief `P(ψ_i)` over ensemble members.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorState {
    probs: Vec<f64>,
}

impl PriorState {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_distribution(probs.iter().copied(), "prior")?;
        Ok(PriorState { probs })
    }

    pub fn uniform(d: usize) -> Self {
        assert!(d > 0);
        PriorState { probs: vec![1.0 / d as f64; d] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Bayes' rule: `P(ψ_i|x) ∝ P(x|ψ_i) P(ψ_i)`.
pub fn posterior(prior: &PriorState, likelihoods: &[f64]) -> Result<PriorState> {
    if likelihoods.len() != prior.len() {
        return Err(Error::DimensionMismatch { expected: prior.len(), got: likelihoods.len() });
    }
    if let Some(&bad) = likelihoods.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::InvalidConfig(format!("likelihoods must be ≥ 0, got {bad}")));
    }
    let joint: Vec<f64> = prior.probs.iter().zip(likelihoods).map(|(p, l)| p * l).collect();
    let evidence: f64 = joint.iter().sum();
    if !(evidence > EVIDENCE_TOL) {
        return Err(Error::DegenerateEvidence { evidence });
    }
    Ok(PriorState { probs: joint.into_iter().map(|j| j / evidence).collect() })
}

/// Dense table of gains `λ(α_k | x, ψ_i) ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainTable {
    n_actions: usize,
    outcomes: Vec<i8>,
    n_members: usize,
    values: Vec<f64>,
}

impl GainTable {
    pub fn from_fn(
        n_actions: usize,
        outcomes: &[i8],
        n_members: usize,
        mut gain: impl FnMut(Action, i8, usize) -> f64,
    ) -> Result<Self> {
        if n_actions == 0 || n_actions > Action::ALL.len() {
            return Err(Error::InvalidConfig(format!("unsupported action count {n_actions}")));
        }
        let mut values = Vec::with_capacity(n_actions * outcomes.len() * n_members);
        for &action in &Action::ALL[..n_actions] {
            for &x in outcomes {
                for i in 0..n_members {
                    let v = gain(action, x, i);
                    if !(v >= 0.0) || !v.is_finite() {
                        return Err(Error::InvalidConfig(format!(
                            "gain λ({action:?}|{x},{i}) = {v} must be finite and ≥ 0"
                        )));
                    }
                    values.push(v);
                }
            }
        }
        Ok(GainTable { n_actions, outcomes: outcomes.to_vec(), n_members, values })
    }

    /// `λ(DoNothing|x) = [x = -1]`, `λ(ApplyPulse|x) = [x = +1]` for every member.
    pub fn threshold(n_members: usize) -> Self {
        Self::from_fn(2, &[1, -1], n_members, |a, x, _| match (a, x) {
            (Action::DoNothing, -1) | (Action::ApplyPulse, 1) => 1.0,
            _ => 0.0,
        })
        .expect("indicator gains are valid")
    }

    /// `λ(α|x,ψ_i)` = ergotropy of the action applied to the normalized
    /// conditional ancilla state after colliding `ψ_i` with `reference_system`.
    /// Outcomes a member cannot produce get gain 0.
    pub fn ergotropy(
        ensemble: &Ensemble,
        reference_system: &DensityMatrix,
        collision: &CollisionParams,
        measurement: &Measurement,
        pulse: &CMatrix,
        omega: f64,
    ) -> Result<Self> {
        let members = ensemble
            .members()
            .ok_or_else(|| Error::InvalidConfig("ergotropy gains need a discrete ensemble".into()))?;
        let h_a = QubitHamiltonian::new(omega).matrix();
        let mut branch_states = Vec::with_capacity(members.len());
        for m in members {
            let joint = collide(reference_system, &m.state.to_density(), collision);
            branch_states.push(measure(&joint, measurement));
        }
        let mut table = vec![0.0; 2 * measurement.labels().len() * members.len()];
        let n_out = measurement.labels().len();
        for (i, branches) in branch_states.iter().enumerate() {
            for (xi, b) in branches.iter().enumerate() {
                if b.degenerate {
                    continue;
                }
                table[xi * members.len() + i] = ergotropy(&b.ancilla, &h_a)?;
                let pulsed = apply_pulse(&b.ancilla, pulse)?;
                table[(n_out + xi) * members.len() + i] = ergotropy(&pulsed, &h_a)?;
            }
        }
        let n = members.len();
        let labels = measurement.labels().to_vec();
        Self::from_fn(2, &labels, n, |a, x, i| {
            let xi = labels.iter().position(|&l| l == x).unwrap();
            table[(a.index() * n_out + xi) * n + i]
        })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    /// `None` if `x` is not an outcome of this table.
    pub fn get(&self, action: Action, x: i8, member: usize) -> Option<f64> {
        let xi = self.outcomes.iter().position(|&o| o == x)?;
        if action.index() >= self.n_actions || member >= self.n_members {
            return None;
        }
        Some(self.values[(action.index() * self.outcomes.len() + xi) * self.n_members + member])
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidConfig(format!("gain scale must be > 0, got {k}")));
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= k);
        Ok(out)
    }
}

/// `G(α_k|x) = Σ_i λ(α_k|x,ψ_i) P(ψ_i|x)`, one entry per action.
/// Unknown outcomes score zero for every action.
pub fn bayes_gain(table: &GainTable, posterior: &PriorState, x: i8) -> Vec<f64> {
    Action::ALL[..table.n_actions]
        .iter()
        .map(|&a| posterior.probs.iter().enumerate().map(|(i, p)| table.get(a, x, i).unwrap_or(0.0) * p).sum())
        .collect()
}

/// Index of the largest gain; ties go to the lowest index.
pub fn argmax_first(gains: &[f64]) -> usize {
    let mut best = 0;
    for (k, &g) in gains.iter().enumerate().skip(1) {
        if g > gains[best] {
            best = k;
        }
    }
    best
}

/// Bayesian strategy over a discrete ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct BayesPolicy {
    pub table: GainTable,
    pub prior: PriorState,
    pub ensemble: Ensemble,
    /// Carry each posterior forward as the next collision's prior.
    pub recycle_prior: bool,
}

impl BayesPolicy {
    pub fn new(table: GainTable, prior: PriorState, ensemble: Ensemble, recycle_prior: bool) -> Result<Self> {
        let d = ensemble
            .members()
            .ok_or_else(|| Error::InvalidConfig("Bayesian policy requires a discrete ensemble".into()))?
            .len();
        if prior.len() != d || table.n_members() != d {
            return Err(Error::DimensionMismatch { expected: d, got: prior.len().max(table.n_members()) });
        }
        Ok(BayesPolicy { table, prior, ensemble, recycle_prior })
    }

    /// Posterior for outcome `x` (starting from `prior`, or the policy prior)
    /// and the action maximizing the Bayesian gain under it.
    pub fn decide_with(&self, x: i8, likelihoods: &[f64], prior: Option<&PriorState>) -> Result<(Action, PriorState)> {
        let post = posterior(prior.unwrap_or(&self.prior), likelihoods)?;
        let gains = bayes_gain(&self.table, &post, x);
        let action = Action::from_index(argmax_first(&gains)).expect("gain vector indexed by action");
        Ok((action, post))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DecisionPolicy {
    /// Pulse iff `x = +1`.
    ThresholdFlip,
    BayesGain(BayesPolicy),
    /// Same action for every ancilla, outcome ignored.
    Unconditional(Action),
}

/// Evidence available to a Bayesian decision for the observed outcome.
#[derive(Clone, Copy, Debug)]
pub struct DecisionContext<'a> {
    /// `P(x|ψ_i)` for the observed `x`, one entry per member.
    pub likelihoods: &'a [f64],
    /// Overrides the policy prior (prior recycling).
    pub prior: Option<&'a PriorState>,
}

pub fn decide(policy: &DecisionPolicy, x: i8, context: Option<DecisionContext<'_>>) -> Result<Action> {
    match policy {
        DecisionPolicy::ThresholdFlip => Ok(if x == 1 { Action::ApplyPulse } else { Action::DoNothing }),
        DecisionPolicy::Unconditional(a) => Ok(*a),
        DecisionPolicy::BayesGain(bp) => {
            let ctx =
                context.ok_or_else(|| Error::InvalidConfig("Bayesian decision needs outcome likelihoods".into()))?;
            bp.decide_with(x, ctx.likelihoods, ctx.prior).map(|(a, _)| a)
        }
    }
}

/// `P(x|ψ_i)` for every outcome (outer index, in measurement label order) and
/// member (inner index), with the system starting in `rho_s`.
pub fn likelihood_table(
    ensemble: &Ensemble,
    rho_s: &DensityMatrix,
    collision: &CollisionParams,
    measurement: &Measurement,
) -> Result<Vec<Vec<f64>>> {
    let members =
        ensemble.members().ok_or_else(|| Error::InvalidConfig("likelihood table needs a discrete ensemble".into()))?;
    let mut table = vec![vec![0.0; members.len()]; measurement.labels().len()];
    for (i, m) in members.iter().enumerate() {
        let joint = collide(rho_s, &m.state.to_density(), collision);
        for (xi, b) in measure(&joint, measurement).iter().enumerate() {
            table[xi][i] = b.probability;
        }
    }
    Ok(table)
}

/// `Σ_i q_i W(ψ_i)`; `ω/2` for the Haar ensemble.
pub fn raw_ensemble_ergotropy(e: &Ensemble, omega: f64) -> f64 {
    match e {
        Ensemble::Haar => omega / 2.0,
        Ensemble::Discrete(members) => {
            let h = QubitHamiltonian::new(omega).matrix();
            members
                .iter()
                .map(|m| {
                    let w = match &m.state {
                        AncillaPrep::Pure(p) => ergotropy_pure(p, omega),
                        AncillaPrep::Mixed(r) => ergotropy(r, &h).expect("qubit state against qubit Hamiltonian"),
                    };
                    m.weight * w
                })
                .sum()
        }
    }
}
