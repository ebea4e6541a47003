//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 bad arguments or
//! configuration, 3 I/O failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::channels::{CollisionParams, ResetParams};
use crate::demon::{Action, DecisionPolicy};
use crate::engine::EngineConfig;
use crate::experiments::{
    default_g_tau_grid, default_gamma_tau_grid, run_histogram_with, run_sweep, sample_haar, stream_rng,
    verify_energetics, MonteCarloPlan, SweepRow, SweepSpec, SweepVariable, VerifyGrid, DEFAULT_BINS, DEFAULT_BURN_IN,
    DEFAULT_SAMPLES, DEFAULT_TRAJECTORY_LEN,
};
use crate::states::ergotropy_pure;

pub const SEED_ENV: &str = "DEMON_BATTERY_SEED";
pub const DEFAULT_SEED: u64 = 2026;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "demon-battery", version, about = "Demon-assisted charging of quantum batteries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Raw and processed ergotropy histograms of Haar-random ancillas.
    Histogram(CommonArgs),
    /// Mean ergotropy against the coupling gτ.
    SweepG(CommonArgs),
    /// Mean ergotropy against the reset strength γτ_SE.
    SweepReset(CommonArgs),
    /// Check the simulated energetics against their closed forms.
    Verify(VerifyArgs),
    /// Print Haar-random ancillas and their ergotropy.
    Sample(CommonArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub g_tau: Option<f64>,
    /// Switches to finite reset with this γτ_SE.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_tau_se: Option<f64>,
    /// Worker threads (0 for all cores). Does not affect results.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Comma-separated sweep grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct VerifyArgs {
    /// Write the JSON report here (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub omega: Option<f64>,
    /// Offsets gτ in the simulated channels only.
    #[arg(long, hide = true, default_value_t = 0.0, allow_hyphen_values = true)]
    pub perturb_g_tau: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    ThresholdFlip,
    PulseAlways,
    NoPulse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetChoice {
    Full,
    Finite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResetConfig {
    pub mode: ResetChoice,
    pub gamma: f64,
    pub tau_se: f64,
    pub omega_s: f64,
}

impl Default for ResetConfig {
    fn default() -> Self {
        ResetConfig { mode: ResetChoice::Full, gamma: 1.0, tau_se: 1.0, omega_s: 1.0 }
    }
}

/// Everything that determines a run's output. Thread count is kept out so
/// that recorded parameters do not depend on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub omega: f64,
    pub g_tau: f64,
    pub tau_sa: f64,
    pub reset: ResetConfig,
    pub policy: PolicyChoice,
    pub n_samples: usize,
    pub seed: u64,
    pub bins: usize,
    pub trajectory_len: usize,
    pub burn_in: usize,
    pub grid: Option<Vec<f64>>,
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            omega: 1.0,
            g_tau: std::f64::consts::FRAC_PI_8,
            tau_sa: 1.0,
            reset: ResetConfig::default(),
            policy: PolicyChoice::ThresholdFlip,
            n_samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            bins: DEFAULT_BINS,
            trajectory_len: DEFAULT_TRAJECTORY_LEN,
            burn_in: DEFAULT_BURN_IN,
            grid: None,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_samples == 0 {
            return Err("n_samples must be ≥ 1".into());
        }
        if self.bins == 0 {
            return Err("bins must be ≥ 1".into());
        }
        if self.trajectory_len == 0 {
            return Err("trajectory_len must be ≥ 1".into());
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err("omega must be positive".into());
        }
        if !(self.tau_sa.is_finite() && self.tau_sa > 0.0) || !self.g_tau.is_finite() {
            return Err("g_tau must be finite and tau_sa positive".into());
        }
        self.engine_config().map(|_| ()).map_err(|e| e.to_string())
    }

    pub fn engine_config(&self) -> crate::Result<EngineConfig> {
        let mut cfg = EngineConfig::qubit_model(self.g_tau)?;
        cfg.omega = self.omega;
        cfg.collision = CollisionParams::new(self.g_tau / self.tau_sa, self.tau_sa)?;
        let r = &self.reset;
        let reset = ResetParams::new(r.gamma, r.tau_se, r.omega_s)?;
        cfg = match r.mode {
            ResetChoice::Finite => cfg.with_finite_reset(reset),
            ResetChoice::Full => {
                cfg.reset = reset;
                cfg
            }
        };
        cfg = cfg.with_policy(match self.policy {
            PolicyChoice::ThresholdFlip => DecisionPolicy::ThresholdFlip,
            PolicyChoice::PulseAlways => DecisionPolicy::Unconditional(Action::ApplyPulse),
            PolicyChoice::NoPulse => DecisionPolicy::Unconditional(Action::DoNothing),
        });
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn plan(&self) -> MonteCarloPlan {
        MonteCarloPlan {
            n_samples: self.n_samples,
            master_seed: self.seed,
            trajectory_len: self.trajectory_len,
            burn_in: self.burn_in,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Verify,
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

/// Loads the config file and applies flag and environment overrides.
/// The seed resolves as flag, then `DEMON_BATTERY_SEED`, then config.
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig, String> {
    resolve(args).map_err(|f| match f {
        Failure::Config(m) | Failure::Io(m) => m,
        Failure::Verify => unreachable!(),
    })
}

fn resolve(args: &CommonArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Ok(v) = std::env::var(SEED_ENV) {
        cfg.seed = v.trim().parse().map_err(|_| Failure::Config(format!("{SEED_ENV} is not a u64: {v:?}")))?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.n {
        cfg.n_samples = n;
    }
    if let Some(g) = args.g_tau {
        cfg.g_tau = g;
    }
    if let Some(gt) = args.gamma_tau_se {
        if !(cfg.reset.gamma > 0.0) {
            return Err(Failure::Config("gamma must be positive to set gamma_tau_se".into()));
        }
        cfg.reset.mode = ResetChoice::Finite;
        cfg.reset.tau_se = gt / cfg.reset.gamma;
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    if let Some(g) = &args.grid {
        cfg.grid = Some(g.clone());
    }
    cfg.validate().map_err(Failure::Config)?;
    Ok(cfg)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Verify) => EXIT_VERIFY_FAILED,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Io(m)) => {
            eprintln!("i/o error: {m}");
            EXIT_IO
        }
    }
}

fn dispatch(cmd: &Command) -> Result<(), Failure> {
    match cmd {
        Command::Verify(v) => verify(v),
        Command::Histogram(a) => with_pool(a, |cfg| histogram(cfg, a)),
        Command::SweepG(a) => with_pool(a, |cfg| sweep(cfg, a, SweepVariable::GTau)),
        Command::SweepReset(a) => with_pool(a, |cfg| sweep(cfg, a, SweepVariable::GammaTauSE)),
        Command::Sample(a) => sample(&resolve(a)?, a),
    }
}

fn with_pool<F>(args: &CommonArgs, f: F) -> Result<(), Failure>
where
    F: FnOnce(&RunConfig) -> Result<(), Failure> + Send,
{
    let cfg = resolve(args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    pool.install(|| f(&cfg))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn header(command: &str, cfg: &RunConfig) -> String {
    let params = serde_json::to_string(cfg).expect("config serializes");
    format!("# demon-battery {}\n# command: {command}\n# params: {params}\n", env!("CARGO_PKG_VERSION"))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn histogram(cfg: &RunConfig, args: &CommonArgs) -> Result<(), Failure> {
    let res = run_histogram_with(&cfg.engine_config()?, &cfg.plan(), cfg.bins)?;
    let mut csv = header("histogram", cfg);
    let _ = writeln!(
        csv,
        "# raw_mean={} raw_se={} processed_mean={} processed_se={}",
        num(res.raw.mean),
        num(res.raw.std_error),
        num(res.processed.mean),
        num(res.processed.std_error)
    );
    csv.push_str("bin_lo,bin_hi,raw_count,processed_count\n");
    let (raw, proc_) = (&res.raw.histogram, &res.processed.histogram);
    for k in 0..raw.counts.len() {
        let _ = writeln!(csv, "{},{},{},{}", num(raw.edges[k]), num(raw.edges[k + 1]), raw.counts[k], proc_.counts[k]);
    }
    emit(args.out.as_deref(), &csv)?;
    if let Some(path) = &args.out {
        let side = path.with_extension("json");
        let json = serde_json::to_string_pretty(&serde_json::json!({ "params": cfg, "result": res }))
            .expect("result serializes");
        fs::write(&side, json + "\n").map_err(|e| io_failure(&side, e))?;
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, args: &CommonArgs, variable: SweepVariable) -> Result<(), Failure> {
    let grid = cfg.grid.clone().unwrap_or_else(|| match variable {
        SweepVariable::GTau => default_g_tau_grid(),
        SweepVariable::GammaTauSE => default_gamma_tau_grid(),
    });
    let template = cfg.engine_config()?;
    let plan = cfg.plan();
    let spec = SweepSpec { variable, grid, fixed: template.clone(), plan };
    let rows = run_sweep(&spec)?;
    let mut csv = header(if variable == SweepVariable::GTau { "sweep-g" } else { "sweep-reset" }, cfg);
    match variable {
        SweepVariable::GTau => {
            csv.push_str(
                "g_tau,raw_mean,raw_se,processed_mean,processed_se,pulse_always_mean,pulse_always_se,no_pulse_mean,no_pulse_se\n",
            );
        }
        SweepVariable::GammaTauSE => {
            let mut full = template;
            full.reset_mode = crate::engine::ResetMode::FullReset;
            let r = run_histogram_with(&full, &plan, cfg.bins)?;
            let _ = writeln!(
                csv,
                "# full_reset_processed_mean={} full_reset_processed_se={}",
                num(r.processed.mean),
                num(r.processed.std_error)
            );
            csv.push_str("gamma_tau_se,raw_mean,raw_se,processed_mean,processed_se\n");
        }
    }
    for row in &rows {
        csv.push_str(&sweep_line(row));
    }
    emit(args.out.as_deref(), &csv)
}

fn sweep_line(row: &SweepRow) -> String {
    let mut line = format!(
        "{},{},{},{},{}",
        num(row.grid_value),
        num(row.raw.mean),
        num(row.raw.std_error),
        num(row.processed.mean),
        num(row.processed.std_error)
    );
    for e in [row.engine_pulse_always, row.engine_no_pulse].into_iter().flatten() {
        let _ = write!(line, ",{},{}", num(e.mean), num(e.std_error));
    }
    line.push('\n');
    line
}

fn sample(cfg: &RunConfig, args: &CommonArgs) -> Result<(), Failure> {
    let mut rng = stream_rng(cfg.seed, 0);
    let mut csv = header("sample", cfg);
    csv.push_str("theta,phi,ergotropy\n");
    for _ in 0..cfg.n_samples {
        let p = sample_haar(&mut rng);
        let _ = writeln!(csv, "{},{},{}", num(p.theta), num(p.phi), num(ergotropy_pure(&p, cfg.omega)));
    }
    emit(args.out.as_deref(), &csv)
}

fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let mut grid = VerifyGrid::default();
    if let Some(w) = args.omega {
        if !(w.is_finite() && w > 0.0) {
            return Err(Failure::Config("omega must be positive".into()));
        }
        grid.omega = w;
    }
    let report = verify_energetics(&grid, args.perturb_g_tau)?;
    let worst = report
        .worst
        .as_ref()
        .map(|w| format!(" (worst: {} at theta={:.6}, g_tau={:.6})", w.field, w.theta, w.g_tau))
        .unwrap_or_default();
    eprintln!(
        "{}: max deviation {:.3e} over {} points, {} comparisons, tolerance {:.0e}{worst}",
        if report.pass { "PASS" } else { "FAIL" },
        report.max_deviation,
        report.points,
        report.compared,
        report.tolerance,
    );
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    emit(args.out.as_deref(), &json)?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn zero_samples_rejected() {
        let cfg = RunConfig { n_samples: 0, ..RunConfig::default() };
        assert_eq!(cfg.validate().unwrap_err(), "n_samples must be ≥ 1");
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"n_sampels": 3}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"n_samples": 3, "reset": {"mode": "finite"}}"#).unwrap();
        assert_eq!(c.n_samples, 3);
        assert_eq!(c.reset.mode, ResetChoice::Finite);
    }

    #[test]
    fn threads_not_serialized() {
        let cfg = RunConfig { threads: Some(4), ..RunConfig::default() };
        assert!(!serde_json::to_string(&cfg).unwrap().contains("threads"));
    }

    #[test]
    fn flags_override_config() {
        let args = CommonArgs { seed: Some(9), n: Some(12), gamma_tau_se: Some(2.0), ..Default::default() };
        let cfg = resolve_config(&args).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.n_samples, 12);
        assert_eq!(cfg.reset.mode, ResetChoice::Finite);
        assert_eq!(cfg.reset.tau_se, 2.0);
    }

    #[test]
    fn help_exits_zero_and_bad_flag_exits_two() {
        assert_eq!(run(["demon-battery", "--help"]), EXIT_OK);
        assert_eq!(run(["demon-battery", "histogram", "--bogus"]), EXIT_CONFIG);
        assert_eq!(run(["demon-battery", "histogram", "--n", "0"]), EXIT_CONFIG);
    }
}
