//! One collision cycle (collide, measure, decide, pulse, reset), chained
//! trajectories, and the per-collision energy bookkeeping.

use std::f64::consts::PI;

use rand::Rng;

use crate::channels::{
    apply_pulse, collide_with, measure, measure_nonselective, reset_closed_form, reset_numeric, CollisionParams,
    MeasuredBranch, Measurement, ResetParams, ResetStart,
};
use crate::demon::{likelihood_table, Action, DecisionContext, DecisionPolicy, PriorState};
use crate::error::{Error, Result};
use crate::qmath::{pauli, ptrace, CMatrix, Subsystem};
use crate::states::{ergotropy, ergotropy_pure, DensityMatrix, PureQubit, QubitHamiltonian};

/// Whether the system memory is fully erased between collisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResetMode {
    /// Every cycle starts from `|0⟩⟨0|` (`γτ_SE → ∞`).
    FullReset,
    /// The system relaxes for the finite time in [`ResetParams`].
    FiniteReset,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    /// Ancilla gap; `H_A = -ω σz / 2`.
    pub omega: f64,
    pub collision: CollisionParams,
    pub measurement: Measurement,
    /// Also carries the system gap `ω_S`.
    pub reset: ResetParams,
    pub policy: DecisionPolicy,
    pub pulse: CMatrix,
    pub reset_mode: ResetMode,
}

impl EngineConfig {
    /// σx measurement, σx pulse, threshold demon, full reset, `ω = ω_S = 1`.
    pub fn qubit_model(g_tau: f64) -> Result<Self> {
        Ok(EngineConfig {
            omega: 1.0,
            collision: CollisionParams::from_g_tau(g_tau)?,
            measurement: Measurement::sigma_x(),
            reset: ResetParams::new(1.0, 0.0, 1.0)?,
            policy: DecisionPolicy::ThresholdFlip,
            pulse: pauli::x(),
            reset_mode: ResetMode::FullReset,
        })
    }

    pub fn with_finite_reset(mut self, reset: ResetParams) -> Self {
        self.reset = reset;
        self.reset_mode = ResetMode::FiniteReset;
        self
    }

    pub fn with_policy(mut self, policy: DecisionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn omega_s(&self) -> f64 {
        self.reset.omega_s
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega.is_finite() || !self.collision.g_tau().is_finite() {
            return Err(Error::InvalidConfig("ω and g·τ_SA must be finite".into()));
        }
        if self.pulse.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.pulse.dim() });
        }
        let dev = self.pulse.unitarity_deviation();
        if dev > crate::qmath::ALGEBRA_TOL {
            return Err(Error::NotUnitary { deviation: dev });
        }
        if let DecisionPolicy::BayesGain(bp) = &self.policy {
            if bp.recycle_prior && self.reset_mode == ResetMode::FiniteReset {
                return Err(Error::InvalidConfig("prior recycling is only supported with full reset".into()));
            }
            if bp.table.n_actions() != 2 {
                return Err(Error::InvalidConfig("Bayesian gain table must score both actions".into()));
            }
        }
        Ok(())
    }
}

/// Everything that happened to one ancilla.
#[derive(Clone, Debug)]
pub struct CollisionRecord {
    pub ancilla_in: PureQubit,
    pub outcome: i8,
    pub action: Action,
    /// Probability of the observed outcome.
    pub probability: f64,
    pub ergotropy_in: f64,
    pub ergotropy_out: f64,
    /// `⟨H_A⟩` before the collision.
    pub energy_in: f64,
    /// `⟨H_A⟩` of the post-measurement ancilla, before any pulse.
    pub energy_measured: f64,
    pub energy_out: f64,
    /// On/off work charged to the system: `tr{(ρ_S|ψ − ρ_S) H_S}`.
    pub delta_e_col: f64,
    /// `tr{OρO†H_A} − tr{ρH_A}` when pulsed, 0 otherwise.
    pub pulse_work: f64,
    pub ancilla_out: DensityMatrix,
    pub rho_s_next: DensityMatrix,
}

/// Produces the ancilla for each collision.
pub trait AncillaSource {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PureQubit>;
}

enum OutcomeChoice {
    Sampled(f64),
    Forced(i8),
}

/// An [`EngineConfig`] with its collision unitary and demon likelihoods
/// precomputed.
#[derive(Clone, Debug)]
pub struct Engine {
    cfg: EngineConfig,
    unitary: CMatrix,
    h_a: CMatrix,
    h_s: CMatrix,
    /// `P(x|ψ_i)` assuming a fully reset system, for Bayesian policies.
    likelihoods: Option<Vec<Vec<f64>>>,
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let likelihoods = match &cfg.policy {
            DecisionPolicy::BayesGain(bp) => {
                Some(likelihood_table(&bp.ensemble, &Self::initial_system(), &cfg.collision, &cfg.measurement)?)
            }
            _ => None,
        };
        Ok(Engine {
            unitary: cfg.collision.unitary(),
            h_a: QubitHamiltonian::new(cfg.omega).matrix(),
            h_s: cfg.reset.system_hamiltonian(),
            likelihoods,
            cfg,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn initial_system() -> DensityMatrix {
        DensityMatrix::basis(2, 0)
    }

    /// One cycle with the outcome drawn from a single uniform variate.
    pub fn run_cycle<R: Rng + ?Sized>(
        &self,
        rho_s: &DensityMatrix,
        psi: &PureQubit,
        rng: &mut R,
    ) -> Result<CollisionRecord> {
        let u: f64 = rng.random();
        self.cycle(rho_s, psi, OutcomeChoice::Sampled(u), &mut None)
    }

    /// One cycle conditioned on `outcome`.
    pub fn run_cycle_forced(&self, rho_s: &DensityMatrix, psi: &PureQubit, outcome: i8) -> Result<CollisionRecord> {
        self.cycle(rho_s, psi, OutcomeChoice::Forced(outcome), &mut None)
    }

    /// `n` chained cycles starting from `|0⟩⟨0|`. With finite reset the
    /// relaxed system of each record seeds the next cycle.
    pub fn run_trajectory<S, R>(&self, n: usize, sampler: &S, rng: &mut R) -> Result<Vec<CollisionRecord>>
    where
        S: AncillaSource + ?Sized,
        R: Rng + ?Sized,
    {
        if n == 0 {
            return Err(Error::InvalidConfig("trajectory needs at least one collision".into()));
        }
        let mut prior = match &self.cfg.policy {
            DecisionPolicy::BayesGain(bp) if bp.recycle_prior => Some(bp.prior.clone()),
            _ => None,
        };
        let mut rho_s = Self::initial_system();
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            let psi = sampler.draw(rng)?;
            let u: f64 = rng.random();
            let rec = self.cycle(&rho_s, &psi, OutcomeChoice::Sampled(u), &mut prior)?;
            rho_s = rec.rho_s_next;
            records.push(rec);
        }
        Ok(records)
    }

    fn select<'b>(&self, branches: &'b [MeasuredBranch], choice: OutcomeChoice) -> Result<&'b MeasuredBranch> {
        match choice {
            OutcomeChoice::Forced(x) => {
                let b = branches
                    .iter()
                    .find(|b| b.outcome == x)
                    .ok_or_else(|| Error::InvalidConfig(format!("outcome {x} is not a measurement label")))?;
                b.require_defined()
            }
            OutcomeChoice::Sampled(u) => {
                let mut cum = 0.0;
                let mut last = None;
                for b in branches.iter().filter(|b| !b.degenerate) {
                    cum += b.probability;
                    last = Some(b);
                    if u < cum {
                        return Ok(b);
                    }
                }
                last.ok_or_else(|| Error::StateInvalid("every measurement branch has zero probability".into()))
            }
        }
    }

    fn cycle(
        &self,
        rho_s: &DensityMatrix,
        psi: &PureQubit,
        choice: OutcomeChoice,
        prior: &mut Option<PriorState>,
    ) -> Result<CollisionRecord> {
        let cfg = &self.cfg;
        let rho_a = psi.to_density();
        let joint = collide_with(&self.unitary, rho_s, &rho_a);
        let rho_s_after = ptrace(joint.matrix(), Subsystem::System);
        let delta_e_col = (rho_s_after - *rho_s.matrix()).trace_product(&self.h_s).re;

        let branches = measure(&joint, &cfg.measurement);
        let branch = self.select(&branches, choice)?;
        let x = branch.outcome;

        let action = match &cfg.policy {
            DecisionPolicy::BayesGain(bp) => {
                let table = self.likelihoods.as_ref().expect("likelihoods built with Bayesian policy");
                let xi = cfg.measurement.index_of(x).expect("outcome from this measurement");
                let (action, post) = bp.decide_with(x, &table[xi], prior.as_ref())?;
                if prior.is_some() {
                    *prior = Some(post);
                }
                action
            }
            policy => crate::demon::decide(policy, x, None::<DecisionContext<'_>>)?,
        };

        // An outcome-blind engine hands on the non-selective ancilla state.
        let measured = match cfg.policy {
            DecisionPolicy::Unconditional(_) => DensityMatrix::new_unchecked(ptrace(
                measure_nonselective(&joint, &cfg.measurement).matrix(),
                Subsystem::Ancilla,
            )),
            _ => branch.ancilla,
        };
        let energy_measured = measured.expectation(&self.h_a);
        let ancilla_out = match action {
            Action::ApplyPulse => apply_pulse(&measured, &cfg.pulse)?,
            Action::DoNothing => measured,
        };
        let energy_out = ancilla_out.expectation(&self.h_a);
        let pulse_work = match action {
            Action::ApplyPulse => energy_out - energy_measured,
            Action::DoNothing => 0.0,
        };

        let rho_s_next = match cfg.reset_mode {
            ResetMode::FullReset => Self::initial_system(),
            ResetMode::FiniteReset => relax(&branch.system, &cfg.reset)?,
        };

        Ok(CollisionRecord {
            ancilla_in: *psi,
            outcome: x,
            action,
            probability: branch.probability,
            ergotropy_in: ergotropy_pure(psi, cfg.omega),
            ergotropy_out: ergotropy(&ancilla_out, &self.h_a)?,
            energy_in: rho_a.expectation(&self.h_a),
            energy_measured,
            energy_out,
            delta_e_col,
            pulse_work,
            ancilla_out,
            rho_s_next,
        })
    }
}

/// Closed form when the system was projected onto `|±⟩`, RK4 otherwise.
fn relax(system: &DensityMatrix, reset: &ResetParams) -> Result<DensityMatrix> {
    for start in [ResetStart::Plus, ResetStart::Minus] {
        if system.max_abs_diff(&start.state()) < 1e-12 {
            return Ok(reset_closed_form(start, reset));
        }
    }
    reset_numeric(system, reset, reset.default_steps())
}

pub fn run_cycle<R: Rng + ?Sized>(
    rho_s: &DensityMatrix,
    psi: &PureQubit,
    cfg: &EngineConfig,
    rng: &mut R,
) -> Result<CollisionRecord> {
    Engine::new(cfg.clone())?.run_cycle(rho_s, psi, rng)
}

pub fn run_trajectory<S, R>(cfg: &EngineConfig, n: usize, sampler: &S, rng: &mut R) -> Result<Vec<CollisionRecord>>
where
    S: AncillaSource + ?Sized,
    R: Rng + ?Sized,
{
    Engine::new(cfg.clone())?.run_trajectory(n, sampler, rng)
}

/// Running sums over collision records.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LedgerTotals {
    pub n: usize,
    pub pulses: usize,
    pub delta_e_col: f64,
    /// `Σ (E_{A|x} − ⟨H_A⟩_in)`.
    pub measurement_shift: f64,
    pub pulse_work: f64,
    pub ergotropy_in: f64,
    pub ergotropy_out: f64,
}

impl LedgerTotals {
    fn add(&mut self, r: &CollisionRecord) {
        self.n += 1;
        self.pulses += usize::from(r.action == Action::ApplyPulse);
        self.delta_e_col += r.delta_e_col;
        self.measurement_shift += r.energy_measured - r.energy_in;
        self.pulse_work += r.pulse_work;
        self.ergotropy_in += r.ergotropy_in;
        self.ergotropy_out += r.ergotropy_out;
    }

    fn merge(&mut self, o: &LedgerTotals) {
        self.n += o.n;
        self.pulses += o.pulses;
        self.delta_e_col += o.delta_e_col;
        self.measurement_shift += o.measurement_shift;
        self.pulse_work += o.pulse_work;
        self.ergotropy_in += o.ergotropy_in;
        self.ergotropy_out += o.ergotropy_out;
    }

    pub fn ergotropy_delta(&self) -> f64 {
        self.ergotropy_out - self.ergotropy_in
    }

    pub fn mean(&self, total: f64) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            total / self.n as f64
        }
    }
}

/// Totals plus the same sums conditioned on the incoming polar angle.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger {
    pub totals: LedgerTotals,
    /// Uniform bins over `θ ∈ [0, π]`.
    pub by_theta: Vec<LedgerTotals>,
}

impl EnergyLedger {
    pub fn new(theta_bins: usize) -> Self {
        EnergyLedger { totals: LedgerTotals::default(), by_theta: vec![LedgerTotals::default(); theta_bins.max(1)] }
    }

    pub fn from_records(records: &[CollisionRecord], theta_bins: usize) -> Self {
        let mut l = Self::new(theta_bins);
        records.iter().for_each(|r| l.record(r));
        l
    }

    pub fn record(&mut self, r: &CollisionRecord) {
        self.totals.add(r);
        let nb = self.by_theta.len();
        let bin = ((r.ancilla_in.theta / PI * nb as f64) as usize).min(nb - 1);
        self.by_theta[bin].add(r);
    }

    /// Panics if the bin counts differ.
    pub fn merge(&mut self, other: &EnergyLedger) {
        assert_eq!(self.by_theta.len(), other.by_theta.len());
        self.totals.merge(&other.totals);
        for (a, b) in self.by_theta.iter_mut().zip(&other.by_theta) {
            a.merge(b);
        }
    }
}

/// Closed-form energetics of the qubit model with a fully reset system,
/// σx measurement and σx pulse on `x = +1`. Energies in the units of `omega`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergeticsOracle {
    pub p_plus: f64,
    /// `E_{A|+1}`, `E_{A|−1}`: ancilla energy after each outcome.
    pub e_a_plus: f64,
    pub e_a_minus: f64,
    /// Work injected by the pulse on `x = +1`.
    pub w_plus: f64,
    /// Outcome-averaged work.
    pub w_avg: f64,
    /// Ergotropy after each outcome, before any pulse.
    pub w_x_plus: f64,
    pub w_x_minus: f64,
    /// Ergotropy of the pulsed `x = +1` branch.
    pub w_tilde_plus: f64,
    /// Final average ergotropy.
    pub w_processed: f64,
}

impl EnergeticsOracle {
    pub const FIELDS: [&'static str; 9] =
        ["p_plus", "e_a_plus", "e_a_minus", "w_plus", "w_avg", "w_x_plus", "w_x_minus", "w_tilde_plus", "w_processed"];

    pub fn values(&self) -> [f64; 9] {
        [
            self.p_plus,
            self.e_a_plus,
            self.e_a_minus,
            self.w_plus,
            self.w_avg,
            self.w_x_plus,
            self.w_x_minus,
            self.w_tilde_plus,
            self.w_processed,
        ]
    }

    /// Whether field `k` is conditioned on the `+1` (`Some(true)`) or `−1`
    /// branch, or is an average (`None`).
    pub fn field_branch(k: usize) -> Option<bool> {
        match k {
            1 | 3 | 5 | 7 => Some(true),
            2 | 6 => Some(false),
            _ => None,
        }
    }
}

pub fn energetics_oracle(theta: f64, g_tau: f64, omega: f64) -> EnergeticsOracle {
    let s = (2.0 * g_tau).sin();
    let ct = theta.cos();
    let sin2 = (theta / 2.0).sin().powi(2);
    let cos2 = (theta / 2.0).cos().powi(2);
    let e_a = |x: f64| -(omega / 2.0) * (ct + x * s) / (1.0 + x * s * ct);
    let w_x = |x: f64| omega * sin2 * (1.0 - x * s) / (1.0 + x * s * ct);
    EnergeticsOracle {
        p_plus: 0.5 * (1.0 + s * ct),
        e_a_plus: e_a(1.0),
        e_a_minus: e_a(-1.0),
        w_plus: omega * (ct + s) / (1.0 + s * ct),
        w_avg: omega / 2.0 * (ct + s),
        w_x_plus: w_x(1.0),
        w_x_minus: w_x(-1.0),
        w_tilde_plus: omega * cos2 * (1.0 + s) / (1.0 + s * ct),
        w_processed: omega / 2.0 * (1.0 + s),
    }
}

/// The same quantities computed by running the channels on `|0⟩⟨0| ⊗ ψ`.
/// Conditional fields of a zero-probability branch are NaN.
pub fn energetics_from_channels(psi: &PureQubit, g_tau: f64, omega: f64) -> Result<EnergeticsOracle> {
    let h = QubitHamiltonian::new(omega).matrix();
    let u = CollisionParams::from_g_tau(g_tau)?.unitary();
    let joint = collide_with(&u, &Engine::initial_system(), &psi.to_density());
    let branches = measure(&joint, &Measurement::sigma_x());
    let (plus, minus) = (&branches[0], &branches[1]);
    debug_assert_eq!((plus.outcome, minus.outcome), (1, -1));

    let cond = |b: &MeasuredBranch, f: &dyn Fn(&DensityMatrix) -> Result<f64>| -> Result<f64> {
        if b.degenerate {
            Ok(f64::NAN)
        } else {
            f(&b.ancilla)
        }
    };
    let energy = |r: &DensityMatrix| Ok(r.expectation(&h));
    let erg = |r: &DensityMatrix| ergotropy(r, &h);
    let pulsed_erg = |r: &DensityMatrix| ergotropy(&apply_pulse(r, &pauli::x())?, &h);
    let work = |r: &DensityMatrix| Ok(apply_pulse(r, &pauli::x())?.expectation(&h) - r.expectation(&h));

    let w_plus = cond(plus, &work)?;
    let w_tilde_plus = cond(plus, &pulsed_erg)?;
    let w_x_minus = cond(minus, &erg)?;
    let weighted = |p: f64, v: f64| if p == 0.0 || v.is_nan() { 0.0 } else { p * v };

    Ok(EnergeticsOracle {
        p_plus: plus.probability,
        e_a_plus: cond(plus, &energy)?,
        e_a_minus: cond(minus, &energy)?,
        w_plus,
        w_avg: weighted(plus.probability, w_plus),
        w_x_plus: cond(plus, &erg)?,
        w_x_minus,
        w_tilde_plus,
        w_processed: weighted(plus.probability, w_tilde_plus) + weighted(minus.probability, w_x_minus),
    })
}
