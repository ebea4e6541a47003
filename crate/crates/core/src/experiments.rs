//! Monte Carlo experiments over Haar-random ancillas: the ergotropy
//! histogram, sweeps over the coupling and the reset time, and the
//! exhaustive check of the engine against its closed-form energetics.
//!
//! Randomness is split into independent ChaCha8 streams, one per trajectory,
//! keyed by `(master_seed, trajectory_index)`. Trajectories may run on any
//! number of threads; results are gathered in index order and reduced
//! sequentially, so the output depends only on the seed.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::ResetParams;
use crate::demon::{Action, AncillaPrep, DecisionPolicy, Ensemble};
use crate::engine::{
    energetics_from_channels, energetics_oracle, AncillaSource, EnergeticsOracle, Engine, EngineConfig,
};
use crate::error::{Error, Result};
use crate::states::PureQubit;

pub const DEFAULT_BINS: usize = 40;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_TRAJECTORY_LEN: usize = 500;
pub const DEFAULT_BURN_IN: usize = 20;
pub const VERIFY_TOL: f64 = 1e-10;

/// Random stream for trajectory `index` under `master_seed`.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Haar-uniform pure qubit: `cos θ` uniform on `[-1, 1]`, `φ` uniform on `[0, 2π)`.
pub fn sample_haar<R: Rng + ?Sized>(rng: &mut R) -> PureQubit {
    let cos_theta = 1.0 - 2.0 * rng.random::<f64>();
    let phi = TAU * rng.random::<f64>();
    PureQubit { theta: cos_theta.clamp(-1.0, 1.0).acos(), phi }
}

/// A seeded stream of Haar-random ancillas.
#[derive(Clone, Debug)]
pub struct HaarQubitSampler {
    rng: ChaCha8Rng,
}

impl HaarQubitSampler {
    pub fn new(seed: u64) -> Self {
        HaarQubitSampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn sample(&mut self) -> PureQubit {
        sample_haar(&mut self.rng)
    }
}

impl Iterator for HaarQubitSampler {
    type Item = PureQubit;

    fn next(&mut self) -> Option<PureQubit> {
        Some(self.sample())
    }
}

impl AncillaSource for Ensemble {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PureQubit> {
        match self {
            Ensemble::Haar => Ok(sample_haar(rng)),
            Ensemble::Discrete(members) => {
                let u: f64 = rng.random();
                let mut cum = 0.0;
                let mut chosen = members.last();
                for m in members {
                    cum += m.weight;
                    if u < cum {
                        chosen = Some(m);
                        break;
                    }
                }
                match chosen.map(|m| &m.state) {
                    Some(AncillaPrep::Pure(p)) => Ok(*p),
                    Some(AncillaPrep::Mixed(_)) => {
                        Err(Error::InvalidConfig("trajectories sample pure ancillas only".into()))
                    }
                    None => Err(Error::InvalidConfig("empty ensemble".into())),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` uniform edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Values outside `[lo, hi]` land in the nearest end bin.
    pub fn new(values: &[f64], bins: usize, lo: f64, hi: f64) -> Self {
        let bins = bins.max(1);
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| if k == bins { hi } else { lo + k as f64 * width }).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let k = ((v - lo) / width).floor();
            let k = if k.is_nan() || k < 0.0 { 0 } else { (k as usize).min(bins - 1) };
            counts[k] += 1;
        }
        Histogram { edges, counts }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Sample standard deviation over `√n`; 0 when `n = 1`.
    pub std_error: f64,
    pub n: usize,
    pub histogram: Histogram,
}

impl SummaryStats {
    /// Histogram spans `[0, omega]`. Panics on an empty sample.
    pub fn from_samples(values: &[f64], bins: usize, omega: f64) -> Self {
        let (mean, std_error) = mean_and_se(values);
        SummaryStats { mean, std_error, n: values.len(), histogram: Histogram::new(values, bins, 0.0, omega) }
    }
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "statistics of an empty sample");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// How a Monte Carlo run is split into trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloPlan {
    /// Recorded collisions in total.
    pub n_samples: usize,
    pub master_seed: u64,
    pub trajectory_len: usize,
    /// Collisions discarded at the start of every trajectory.
    pub burn_in: usize,
}

impl MonteCarloPlan {
    pub fn new(n_samples: usize, master_seed: u64) -> Self {
        MonteCarloPlan { n_samples, master_seed, trajectory_len: DEFAULT_TRAJECTORY_LEN, burn_in: DEFAULT_BURN_IN }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be ≥ 1".into()));
        }
        if self.trajectory_len == 0 {
            return Err(Error::InvalidConfig("trajectory_len must be ≥ 1".into()));
        }
        Ok(())
    }

    fn trajectories(&self) -> Vec<(u64, usize)> {
        let full = self.n_samples / self.trajectory_len;
        let rest = self.n_samples % self.trajectory_len;
        let mut out: Vec<(u64, usize)> = (0..full as u64).map(|k| (k, self.trajectory_len)).collect();
        if rest > 0 {
            out.push((full as u64, rest));
        }
        out
    }
}

/// `(ergotropy_in, ergotropy_out)` per recorded collision, in trajectory order.
pub fn simulate(cfg: &EngineConfig, plan: &MonteCarloPlan) -> Result<Vec<(f64, f64)>> {
    plan.validate()?;
    let engine = Engine::new(cfg.clone())?;
    let chunks: Vec<Result<Vec<(f64, f64)>>> = plan
        .trajectories()
        .into_par_iter()
        .map(|(k, len)| {
            let mut rng = stream_rng(plan.master_seed, k);
            let recs = engine.run_trajectory(plan.burn_in + len, &Ensemble::Haar, &mut rng)?;
            Ok(recs[plan.burn_in..].iter().map(|r| (r.ergotropy_in, r.ergotropy_out)).collect())
        })
        .collect();
    let mut out = Vec::with_capacity(plan.n_samples);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramResult {
    pub raw: SummaryStats,
    pub processed: SummaryStats,
}

pub fn run_histogram_with(cfg: &EngineConfig, plan: &MonteCarloPlan, bins: usize) -> Result<HistogramResult> {
    let samples = simulate(cfg, plan)?;
    let raw: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let processed: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(HistogramResult {
        raw: SummaryStats::from_samples(&raw, bins, cfg.omega),
        processed: SummaryStats::from_samples(&processed, bins, cfg.omega),
    })
}

/// Raw vs processed ergotropy of `n` Haar ancillas with default binning.
pub fn run_histogram_experiment(cfg: &EngineConfig, n: usize, seed: u64) -> Result<HistogramResult> {
    run_histogram_with(cfg, &MonteCarloPlan::new(n, seed), DEFAULT_BINS)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SweepVariable {
    GTau,
    GammaTauSE,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    /// Template; the swept parameter is overwritten at each grid point.
    pub fixed: EngineConfig,
    pub plan: MonteCarloPlan,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("sweep grid must be nonempty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) || self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("sweep grid must be finite and strictly increasing".into()));
        }
        if self.variable == SweepVariable::GammaTauSE {
            if !(self.fixed.reset.gamma > 0.0) {
                return Err(Error::InvalidConfig("reset sweep needs γ > 0".into()));
            }
            if self.grid[0] < 0.0 {
                return Err(Error::InvalidConfig("γτ_SE must be ≥ 0".into()));
            }
        }
        self.fixed.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    fn of(values: &[f64]) -> Self {
        let (mean, std_error) = mean_and_se(values);
        Estimate { mean, std_error }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub grid_value: f64,
    pub raw: Estimate,
    pub processed: Estimate,
    /// Every ancilla pulsed, outcome ignored (coupling sweeps only).
    pub engine_pulse_always: Option<Estimate>,
    /// Every ancilla collided and measured, never pulsed (coupling sweeps only).
    pub engine_no_pulse: Option<Estimate>,
}

/// All grid points reuse the same master seed, so the curves share their
/// random numbers and differences between points carry little noise.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.grid
        .par_iter()
        .map(|&v| {
            let mut cfg = spec.fixed.clone();
            match spec.variable {
                SweepVariable::GTau => {
                    cfg.collision =
                        crate::channels::CollisionParams::new(v / cfg.collision.tau_sa, cfg.collision.tau_sa)?;
                }
                SweepVariable::GammaTauSE => {
                    let (gamma, omega_s) = (cfg.reset.gamma, cfg.reset.omega_s);
                    cfg = cfg.with_finite_reset(ResetParams::new(gamma, v / gamma, omega_s)?);
                }
            }
            let samples = simulate(&cfg, &spec.plan)?;
            let raw: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let processed: Vec<f64> = samples.iter().map(|s| s.1).collect();
            let (always, never) = if spec.variable == SweepVariable::GTau {
                let run = |a: Action| -> Result<Estimate> {
                    let c = cfg.clone().with_policy(DecisionPolicy::Unconditional(a));
                    let s = simulate(&c, &spec.plan)?;
                    Ok(Estimate::of(&s.iter().map(|s| s.1).collect::<Vec<_>>()))
                };
                (Some(run(Action::ApplyPulse)?), Some(run(Action::DoNothing)?))
            } else {
                (None, None)
            };
            Ok(SweepRow {
                grid_value: v,
                raw: Estimate::of(&raw),
                processed: Estimate::of(&processed),
                engine_pulse_always: always,
                engine_no_pulse: never,
            })
        })
        .collect()
}

/// `gτ ∈ {0, π/16, π/8, 3π/16, π/4}`.
pub fn default_g_tau_grid() -> Vec<f64> {
    (0..5).map(|k| k as f64 * PI / 16.0).collect()
}

pub fn default_gamma_tau_grid() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0]
}

/// 181 points, one degree apart, covering `[0, π]`.
pub fn default_theta_grid() -> Vec<f64> {
    (0..=180).map(|k| k as f64 * PI / 180.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyGrid {
    pub thetas: Vec<f64>,
    pub g_taus: Vec<f64>,
    pub omega: f64,
    /// Azimuth of the test states; the energetics do not depend on it.
    pub phi: f64,
}

impl Default for VerifyGrid {
    fn default() -> Self {
        VerifyGrid { thetas: default_theta_grid(), g_taus: default_g_tau_grid(), omega: 1.0, phi: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Worst {
    pub theta: f64,
    pub g_tau: f64,
    pub field: &'static str,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub points: usize,
    pub compared: usize,
    /// Conditional fields skipped because their branch has zero probability.
    pub skipped: usize,
    pub worst: Option<Worst>,
    pub grid: VerifyGrid,
}

/// Runs the channels at every grid point and compares each energetics field
/// with its closed form. `g_tau_perturbation` is added to the channel side
/// only (a negative control; 0 for a real check).
pub fn verify_energetics(grid: &VerifyGrid, g_tau_perturbation: f64) -> Result<VerifyReport> {
    let mut max_deviation: f64 = 0.0;
    let mut worst = None;
    let (mut compared, mut skipped, mut points) = (0, 0, 0);
    for &g_tau in &grid.g_taus {
        for &theta in &grid.thetas {
            points += 1;
            let psi = PureQubit::new(theta, grid.phi)?;
            let brute = energetics_from_channels(&psi, g_tau + g_tau_perturbation, grid.omega)?;
            let closed = energetics_oracle(theta, g_tau, grid.omega);
            for (k, (b, c)) in brute.values().iter().zip(closed.values()).enumerate() {
                if let Some(plus) = EnergeticsOracle::field_branch(k) {
                    let p = if plus { closed.p_plus } else { 1.0 - closed.p_plus };
                    if p < 1e-12 {
                        skipped += 1;
                        continue;
                    }
                }
                let dev = (b - c).abs();
                compared += 1;
                let dev = if dev.is_nan() { f64::INFINITY } else { dev };
                if dev > max_deviation || worst.is_none() {
                    max_deviation = max_deviation.max(dev);
                    worst = Some(Worst { theta, g_tau, field: EnergeticsOracle::FIELDS[k], deviation: dev });
                }
            }
        }
    }
    Ok(VerifyReport {
        max_deviation,
        tolerance: VERIFY_TOL,
        pass: max_deviation <= VERIFY_TOL,
        points,
        compared,
        skipped,
        worst,
        grid: grid.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::ergotropy_pure;
    use std::f64::consts::FRAC_PI_8;

    #[test]
    fn haar_moments() {
        let mut s = HaarQubitSampler::new(17);
        let n = 100_000;
        let draws: Vec<PureQubit> = (0..n).map(|_| s.sample()).collect();
        let cos_mean = draws.iter().map(|p| p.theta.cos()).sum::<f64>() / n as f64;
        assert!(cos_mean.abs() < 3.0 * (1.0 / 3.0 / n as f64).sqrt());
        let erg: Vec<f64> = draws.iter().map(|p| ergotropy_pure(p, 1.0)).collect();
        let (m, se) = mean_and_se(&erg);
        assert!((m - 0.5).abs() < 3.0 * se);
        let phi_mean = draws.iter().map(|p| p.phi).sum::<f64>() / n as f64;
        assert!((phi_mean - PI).abs() < 3.0 * (TAU * TAU / 12.0 / n as f64).sqrt());
        assert!(draws.iter().all(|p| (0.0..=PI).contains(&p.theta) && (0.0..TAU).contains(&p.phi)));
    }

    #[test]
    fn haar_sampler_is_reproducible() {
        let a: Vec<PureQubit> = HaarQubitSampler::new(5).take(50).collect();
        let b: Vec<PureQubit> = HaarQubitSampler::new(5).take(50).collect();
        assert_eq!(a, b);
        let c: Vec<PureQubit> = HaarQubitSampler::new(6).take(50).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn discrete_ensemble_sampling_follows_weights() {
        let ens = Ensemble::pure(vec![(PureQubit::ground(), 0.25), (PureQubit::excited(), 0.75)]).unwrap();
        let mut rng = stream_rng(1, 0);
        let n = 20_000;
        let excited = (0..n).filter(|_| ens.draw(&mut rng).unwrap().theta > 1.0).count() as f64 / n as f64;
        assert!((excited - 0.75).abs() < 3.0 * (0.75 * 0.25 / n as f64).sqrt());
    }

    #[test]
    fn single_sample_has_zero_std_error() {
        let cfg = EngineConfig::qubit_model(FRAC_PI_8).unwrap();
        let r = run_histogram_experiment(&cfg, 1, 3).unwrap();
        assert_eq!(r.raw.n, 1);
        assert_eq!(r.processed.n, 1);
        assert_eq!(r.raw.std_error, 0.0);
        assert_eq!(r.processed.histogram.counts.iter().sum::<usize>(), 1);
    }

    #[test]
    fn histogram_edges_cover_range() {
        let h = Histogram::new(&[0.0, 0.5, 1.0, 1.0 + 1e-16], 40, 0.0, 1.0);
        assert_eq!(h.edges.len(), 41);
        assert_eq!(h.edges[0], 0.0);
        assert_eq!(h.edges[40], 1.0);
        assert_eq!(h.counts.iter().sum::<usize>(), 4);
        assert_eq!(h.counts[39], 2);
    }

    #[test]
    fn plan_splits_samples() {
        let mut plan = MonteCarloPlan::new(1234, 0);
        plan.trajectory_len = 500;
        let t = plan.trajectories();
        assert_eq!(t, vec![(0, 500), (1, 500), (2, 234)]);
        assert!(MonteCarloPlan::new(0, 0).validate().is_err());
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let fixed = EngineConfig::qubit_model(FRAC_PI_8).unwrap();
        let mut spec =
            SweepSpec { variable: SweepVariable::GTau, grid: vec![], fixed, plan: MonteCarloPlan::new(10, 1) };
        assert!(run_sweep(&spec).is_err());
        spec.grid = vec![0.2, 0.1];
        assert!(run_sweep(&spec).is_err());
        spec.grid = vec![0.1, 0.2];
        assert_eq!(run_sweep(&spec).unwrap().len(), 2);
    }

    #[test]
    fn verify_small_grid_passes_and_perturbation_fails() {
        let grid = VerifyGrid {
            thetas: vec![0.0, 0.7, PI / 2.0, PI],
            g_taus: vec![0.0, FRAC_PI_8, PI / 4.0],
            omega: 1.0,
            phi: 0.3,
        };
        let ok = verify_energetics(&grid, 0.0).unwrap();
        assert!(ok.pass, "{ok:?}");
        assert_eq!(ok.points, 12);
        assert!(ok.skipped > 0);
        let bad = verify_energetics(&grid, 1e-3).unwrap();
        assert!(!bad.pass);
    }
}
