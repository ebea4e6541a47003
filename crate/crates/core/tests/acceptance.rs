//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{haar_su2, random_state};
use demon_battery::channels::{
    apply_pulse, collide, measure, reset_closed_form, reset_numeric, CollisionParams, Measurement, ResetParams,
    ResetStart,
};
use demon_battery::cli::DEFAULT_SEED;
use demon_battery::engine::EngineConfig;
use demon_battery::experiments::{
    default_g_tau_grid, default_gamma_tau_grid, run_histogram_with, run_sweep, sample_haar, stream_rng,
    verify_energetics, MonteCarloPlan, SweepSpec, SweepVariable, VerifyGrid,
};
use demon_battery::qmath::pauli;
use demon_battery::states::{ergotropy, ergotropy_pure, passive_energy, PureQubit, QubitHamiltonian};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 10_000;

type Criterion = Box<dyn FnOnce() -> Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(failures: &mut Vec<String>, detail: &mut Vec<String>, ok: bool, what: String) {
    if !ok {
        failures.push(what.clone());
    }
    detail.push(what);
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let mut o = f();
    let el = t.elapsed();
    if el > limit {
        o.pass = false;
        o.detail.push_str(&format!("; runtime {el:.2?} exceeds {limit:?}"));
    } else {
        o.detail.push_str(&format!("; runtime {el:.2?}"));
    }
    o
}

fn within(x: f64, target: f64, se: f64) -> bool {
    (x - target).abs() <= 3.0 * se
}

fn energetics_oracle_equivalence() -> Outcome {
    let r = verify_energetics(&VerifyGrid::default(), 0.0).expect("verification runs");
    Outcome {
        pass: r.pass && r.max_deviation <= 1e-10,
        detail: format!("max deviation {:.3e} over {} points ({} comparisons)", r.max_deviation, r.points, r.compared),
    }
}

fn coupling_reproduction() -> Outcome {
    let plan = MonteCarloPlan::new(N, DEFAULT_SEED);
    let cfg = EngineConfig::qubit_model(FRAC_PI_8).unwrap();
    let h = run_histogram_with(&cfg, &plan, 40).unwrap();
    let (mut fails, mut detail) = (Vec::new(), Vec::new());
    check(
        &mut fails,
        &mut detail,
        within(h.processed.mean, 0.85355, h.processed.std_error),
        format!("processed {:.5} ± {:.5} vs 0.85355", h.processed.mean, h.processed.std_error),
    );
    check(
        &mut fails,
        &mut detail,
        within(h.raw.mean, 0.5, h.raw.std_error),
        format!("raw {:.5} ± {:.5} vs 0.5", h.raw.mean, h.raw.std_error),
    );

    let rows =
        run_sweep(&SweepSpec { variable: SweepVariable::GTau, grid: default_g_tau_grid(), fixed: cfg, plan }).unwrap();
    for r in &rows {
        let target = 0.5 * (1.0 + (2.0 * r.grid_value).sin());
        check(
            &mut fails,
            &mut detail,
            within(r.processed.mean, target, r.processed.std_error),
            format!("gτ={:.4}: {:.5} ± {:.5} vs {:.5}", r.grid_value, r.processed.mean, r.processed.std_error, target),
        );
    }
    let monotone = rows.windows(2).all(|w| w[1].processed.mean > w[0].processed.mean);
    check(&mut fails, &mut detail, monotone, format!("monotone increasing: {monotone}"));
    let first = &rows[0].processed;
    let last = &rows[rows.len() - 1].processed;
    check(
        &mut fails,
        &mut detail,
        within(first.mean, 0.5, first.std_error),
        format!("gτ=0 endpoint {:.5}", first.mean),
    );
    check(
        &mut fails,
        &mut detail,
        (last.mean - 1.0).abs() <= 3.0 * last.std_error + 1e-12,
        format!("gτ=π/4 endpoint {:.12}", last.mean),
    );
    summarize(fails, detail)
}

fn reset_reproduction() -> Outcome {
    let plan = MonteCarloPlan::new(N, DEFAULT_SEED);
    let fixed =
        EngineConfig::qubit_model(FRAC_PI_8).unwrap().with_finite_reset(ResetParams::new(1.0, 1.0, 1.0).unwrap());
    let rows =
        run_sweep(&SweepSpec { variable: SweepVariable::GammaTauSE, grid: default_gamma_tau_grid(), fixed, plan })
            .unwrap();
    let full = run_histogram_with(&EngineConfig::qubit_model(FRAC_PI_8).unwrap(), &plan, 40).unwrap();
    let (mut fails, mut detail) = (Vec::new(), Vec::new());
    let curve: Vec<String> = rows.iter().map(|r| format!("{}:{:.4}", r.grid_value, r.processed.mean)).collect();
    detail.push(format!("curve [{}]", curve.join(", ")));
    let monotone = rows.windows(2).all(|w| {
        let se = w[0].processed.std_error.hypot(w[1].processed.std_error);
        w[1].processed.mean >= w[0].processed.mean - 3.0 * se
    });
    check(&mut fails, &mut detail, monotone, format!("nondecreasing within 3 SE: {monotone}"));
    let at8 = rows.last().unwrap().processed.mean;
    check(
        &mut fails,
        &mut detail,
        (at8 - full.processed.mean).abs() <= 0.01,
        format!("γτ=8 {:.5} vs full reset {:.5}", at8, full.processed.mean),
    );
    let at0 = rows[0].processed.mean;
    check(&mut fails, &mut detail, at0 < 0.5, format!("γτ=0 {:.5} strictly below 0.5", at0));
    summarize(fails, detail)
}

fn ergotropy_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let h = QubitHamiltonian::new(1.0).matrix();
    let (mut undershoot, mut worst_gap) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let rho = random_state(&mut rng, 2);
        let e = rho.expectation(&h);
        let floor = passive_energy(&rho, &h).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..100_000 {
            let u = haar_su2(&mut rng);
            best = best.min(u.conjugate(rho.matrix()).trace_product(&h).re);
        }
        undershoot = undershoot.max(floor - best);
        let w = ergotropy(&rho, &h).unwrap();
        worst_gap = worst_gap.max(((e - best) - w).abs());
    }
    let mut pure_dev = 0.0f64;
    for _ in 0..1000 {
        let psi = sample_haar(&mut rng);
        let omega = 0.1 + 4.9 * rng.random::<f64>();
        let general = ergotropy(&psi.to_density(), &QubitHamiltonian::new(omega).matrix()).unwrap();
        pure_dev = pure_dev.max((general - ergotropy_pure(&psi, omega)).abs());
    }
    Outcome {
        pass: undershoot <= 1e-12 && worst_gap <= 1e-4 && pure_dev <= 1e-12,
        detail: format!(
            "brute force below eigen-sort by at most {undershoot:.2e}, max gap {worst_gap:.2e}; pure formula deviation {pure_dev:.2e}"
        ),
    }
}

fn reset_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for gt in [0.1, 1.0, 3.0] {
        for wt in [0.0, 1.0, PI] {
            let p = ResetParams::new(gt, 1.0, wt).unwrap();
            for start in [ResetStart::Plus, ResetStart::Minus] {
                let num = reset_numeric(&start.state(), &p, p.default_steps()).unwrap();
                worst = worst.max(num.max_abs_diff(&reset_closed_form(start, &p)));
            }
        }
    }
    Outcome { pass: worst <= 1e-8, detail: format!("max entry deviation {worst:.3e}") }
}

fn conservation_identities() -> Outcome {
    let mut rng = stream_rng(DEFAULT_SEED, 6);
    let omega = 1.0;
    let h = QubitHamiltonian::new(omega).matrix();
    let meas = Measurement::sigma_x();
    let rho_s = demon_battery::states::DensityMatrix::basis(2, 0);
    let mut dev = [0.0f64; 4];
    for _ in 0..1000 {
        let theta = PI * rng.random::<f64>();
        let g_tau = FRAC_PI_4 * rng.random::<f64>();
        let psi = PureQubit::new(theta, 2.0 * PI * rng.random::<f64>()).unwrap();
        let joint = collide(&rho_s, &psi.to_density(), &CollisionParams::from_g_tau(g_tau).unwrap());
        let branches = measure(&joint, &meas);
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        let live = || branches.iter().filter(|b| !b.degenerate);
        let energy: f64 = live().map(|b| b.probability * b.ancilla.expectation(&h)).sum();
        let erg: f64 = live().map(|b| b.probability * ergotropy(&b.ancilla, &h).unwrap()).sum();
        dev[0] = dev[0].max((total - 1.0).abs());
        dev[1] = dev[1].max((energy + omega / 2.0 * theta.cos()).abs());
        dev[2] = dev[2].max((erg - omega * (theta / 2.0).sin().powi(2)).abs());
        let plus = &branches[meas.index_of(1).unwrap()];
        if !plus.degenerate {
            let pulsed = apply_pulse(&plus.ancilla, &pauli::x()).unwrap();
            let work = pulsed.expectation(&h) - plus.ancilla.expectation(&h);
            let gain = ergotropy(&pulsed, &h).unwrap() - ergotropy(&plus.ancilla, &h).unwrap();
            dev[3] = dev[3].max((gain - work).abs());
        }
    }
    Outcome {
        pass: dev.iter().all(|&d| d <= 1e-12),
        detail: format!(
            "ΣP {:.2e}, ΣP·E {:.2e}, ΣP·W {:.2e}, pulse bookkeeping {:.2e}",
            dev[0], dev[1], dev[2], dev[3]
        ),
    }
}

fn thread_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("demon-battery-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.join(format!("sweep-{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_demon-battery"))
            .env_remove("DEMON_BATTERY_SEED")
            .args(["sweep-g", "--seed", "12345", "--threads", threads, "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        outputs.push((status.success(), std::fs::read(&out).unwrap_or_default()));
    }
    let _ = std::fs::remove_dir_all(&dir);
    let same = outputs[0].1 == outputs[1].1 && !outputs[0].1.is_empty();
    Outcome {
        pass: outputs.iter().all(|o| o.0) && same,
        detail: format!("--threads 1 vs 4: {} bytes, identical: {same}", outputs[0].1.len()),
    }
}

fn summarize(fails: Vec<String>, detail: Vec<String>) -> Outcome {
    let mut d = detail.join("; ");
    if !fails.is_empty() {
        d.push_str(&format!("; failed: {}", fails.join(" | ")));
    }
    Outcome { pass: fails.is_empty(), detail: d }
}

fn main() {
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1 energetics oracle equivalence", Box::new(|| timed(Duration::from_secs(5), energetics_oracle_equivalence))),
        ("2 coupling sweep and histogram means", Box::new(|| timed(Duration::from_secs(10), coupling_reproduction))),
        ("3 finite reset sweep", Box::new(|| timed(Duration::from_secs(60), reset_reproduction))),
        ("4 ergotropy brute force", Box::new(ergotropy_correctness)),
        ("5 reset channel oracle", Box::new(reset_oracle)),
        ("6 conservation identities", Box::new(conservation_identities)),
        ("7 thread-count determinism", Box::new(thread_determinism)),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let o = f();
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
}
