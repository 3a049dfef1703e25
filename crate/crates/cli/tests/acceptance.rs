//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use photodet::clicksim::{
    estimate_beat, estimate_bias, estimate_visibility, simulate_clicks, EstimateWithError,
};
use photodet::gating::{
    gate_average_closed, gate_average_numeric, unsharpness_check, visibility_map, Axis, UNSHARPNESS_SLACK,
};
use photodet::kinematics::{doppler_frequencies, doppler_splitting};
use photodet::povm::{
    amplitude_ratio_branch_tuned, amplitude_ratio_general, broadband_closed_form, detection_amplitudes,
};
use photodet::response::branch_tuned_lorentzian;
use photodet::selfcheck::random_susceptibility;
use photodet::{Branch, DetectorMotion, GateWindow, LabMode, PhotonState, SusceptibilitySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, budget_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < budget_s, format!("{s:.2} s of {budget_s} s"))
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn random_chi0(rng: &mut impl Rng) -> Complex64 {
    Complex64::from_polar(rng.random_range(0.1..3.0), rng.random_range(-PI..PI))
}

fn complementarity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let beta = rng.random_range(-0.99..0.99);
        let omega = 10f64.powf(rng.random_range(-2.0..2.0));
        let spec = random_susceptibility(&mut rng, omega);
        let amps = detection_amplitudes(
            &DetectorMotion::new(beta).unwrap(),
            &LabMode::new(omega).unwrap(),
            &spec,
        )
        .unwrap();
        worst = worst.max((amps.visibility().powi(2) + amps.bias().powi(2) - 1.0).abs());
    }
    let (fast, time) = within_budget(start.elapsed(), 1.0);
    outcome(
        worst <= 1e-12 && fast,
        format!("10^4 draws, max |V^2+B^2-1| = {worst:.2e} (tol 1e-12), {time}"),
    )
}

fn broadband_closed() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mode = LabMode::new(1.0).unwrap();
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let beta = rng.random_range(-0.99..0.99);
        let spec = SusceptibilitySpec::broadband(random_chi0(&mut rng));
        let amps = detection_amplitudes(&DetectorMotion::new(beta).unwrap(), &mode, &spec).unwrap();
        let (v, b) = broadband_closed_form(beta).unwrap();
        worst = worst
            .max((amps.visibility() - v).abs())
            .max((amps.bias() - b).abs());
    }
    let amps = detection_amplitudes(
        &DetectorMotion::new(0.5).unwrap(),
        &mode,
        &SusceptibilitySpec::broadband(one()),
    )
    .unwrap();
    let landmark = (amps.visibility() - 0.6).abs().max((amps.bias() + 0.8).abs());
    let (fast, time) = within_budget(start.elapsed(), 1.0);
    outcome(
        worst <= 1e-12 && landmark <= 1e-12 && fast,
        format!(
            "10^3 draws, max deviation {worst:.2e}; beta=0.5 -> ({:.15}, {:.15}) (tol 1e-12), {time}",
            amps.visibility(),
            amps.bias()
        ),
    )
}

fn ratio_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let beta = rng.random_range(-0.95..0.95);
        let omega = 10f64.powf(rng.random_range(-1.0..1.0));
        let kappa = omega * 10f64.powf(rng.random_range(-3.0..0.5));
        let motion = DetectorMotion::new(beta).unwrap();
        let mode = LabMode::new(omega).unwrap();
        let (omega_plus, _) = doppler_frequencies(&motion, &mode);
        let spec = SusceptibilitySpec::lorentzian(random_chi0(&mut rng), omega_plus, kappa).unwrap();
        let direct = detection_amplitudes(&motion, &mode, &spec).unwrap().ratio();
        let general = amplitude_ratio_general(&motion, &mode, omega_plus, kappa).unwrap();
        let tuned = amplitude_ratio_branch_tuned(&motion, &mode, kappa).unwrap();
        for (a, b) in [(direct, general), (direct, tuned), (general, tuned)] {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
        }
    }
    let (fast, time) = within_budget(start.elapsed(), 1.0);
    outcome(
        worst <= 1e-12 && fast,
        format!("10^3 draws, max pairwise relative deviation {worst:.2e} (tol 1e-12), {time}"),
    )
}

fn onset_landmark() -> Outcome {
    let tuned = |beta: f64, q: f64| {
        let motion = DetectorMotion::new(beta).unwrap();
        let mode = LabMode::new(1.0).unwrap();
        let spec = branch_tuned_lorentzian(&motion, &mode, one(), 1.0 / q, Branch::Plus).unwrap();
        detection_amplitudes(&motion, &mode, &spec).unwrap()
    };
    let a = tuned(0.025, 10.0);
    let onset = [
        ("r", a.ratio(), 0.74326),
        ("V", a.visibility(), 0.95754),
        ("|B|", a.bias().abs(), 0.28830),
    ];
    let onset_ok = onset.iter().all(|(_, got, want)| (got - want).abs() <= 1e-5);

    let beta = 1e-6;
    let b = tuned(beta, 1.0 / (4.0 * beta));
    let limit = [
        ("r", b.ratio(), FRAC_1_SQRT_2),
        ("V", b.visibility(), 0.94281),
        ("|B|", b.bias().abs(), 1.0 / 3.0),
    ];
    let limit_ok = limit.iter().all(|(_, got, want)| (got - want).abs() <= 1e-6);
    let fmt = |rows: &[(&str, f64, f64)]| {
        rows.iter()
            .map(|(name, got, want)| {
                format!(
                    "{name}={got:.12} (target {want:.12}, off {:.2e})",
                    (got - want).abs()
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    // Diagnostic only: the ratio without the (1+beta)/(1-beta) prefactor.
    let dispersive = b.ratio() * (1.0 - beta) / (1.0 + beta);
    outcome(
        onset_ok && limit_ok,
        format!(
            "onset [{}] tol 1e-5 {}; beta=1e-6, Q=1/(4 beta) [{}] tol 1e-6 {}; dispersive factor alone {dispersive:.15}",
            fmt(&onset),
            if onset_ok { "ok" } else { "FAILED" },
            fmt(&limit),
            if limit_ok { "ok" } else { "FAILED" },
        ),
    )
}

fn gate_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let t = 0.1 + (10.0 - 0.1) * i as f64 / 49.0;
        let window = GateWindow::rectangular(t).unwrap();
        for j in 0..50 {
            // dOmega * T spans [0, 100]
            let dw = 10.0 * j as f64 / 49.0;
            let closed = gate_average_closed(dw, &window);
            // Simpson error scales as (dOmega h)^4; keep dOmega h <= 0.01
            let steps = 64 + (100.0 * dw * t) as usize;
            let numeric = gate_average_numeric(dw, &window, steps).unwrap();
            worst = worst.max((closed - numeric).norm());
        }
    }
    let mode = LabMode::new(1.0).unwrap();
    let mut zero = 0.0_f64;
    for beta in [0.01, 0.1, 0.3, 0.6, 0.9, -0.5] {
        let motion = DetectorMotion::new(beta).unwrap();
        let t = PI / (motion.gamma() * beta * mode.omega()).abs();
        let g = gate_average_closed(
            doppler_splitting(&motion, &mode),
            &GateWindow::rectangular(t).unwrap(),
        );
        zero = zero.max(g.norm());
    }
    let (fast, time) = within_budget(start.elapsed(), 5.0);
    outcome(
        worst <= 1e-9 && zero <= 1e-10 && fast,
        format!(
            "50x50 grid, dOmega T in [0, 100], max |closed - Simpson| = {worst:.2e} (tol 1e-9); \
             max modulus at gamma beta omega T = pi {zero:.2e} (tol 1e-10), {time}"
        ),
    )
}

fn unsharpness_map() -> Outcome {
    let start = Instant::now();
    let q = 10.0;
    let bq = Axis::new(0.0, 2.0, 128).unwrap().values();
    let bwt = Axis::new(0.0, 6.0, 128).unwrap().values();
    let map = visibility_map(&bq, &bwt, q, &LabMode::new(1.0).unwrap()).unwrap();
    let mut worst = f64::MIN;
    let mut all_ok = true;
    let mut rises = 0;
    for (i, b) in map.row_bias.iter().enumerate() {
        for (j, x) in bwt.iter().enumerate() {
            let (lhs, ok) = unsharpness_check(map.get(i, j), *b);
            worst = worst.max(lhs);
            all_ok &= ok;
            if i > 0 && *x < 1.0 && map.get(i, j) > map.get(i - 1, j) {
                rises += 1;
            }
        }
    }
    let (fast, time) = within_budget(start.elapsed(), 5.0);
    outcome(
        all_ok && rises == 0 && fast,
        format!(
            "128x128 map, Q={q}, beta Q in [0, 2], beta omega T in [0, 6]: max V_obs^2+B^2 = {worst:.15} \
             (bound 1 + {UNSHARPNESS_SLACK:e}); {rises} increases along beta Q at beta omega T < 1, {time}"
        ),
    )
}

fn z_line(name: &str, est: &EstimateWithError, target: f64) -> (bool, String) {
    let z = est.z_score(target);
    (
        z <= 4.0,
        format!(
            "{name} {:.6} +- {:.2e} vs {target:.6} (|z| {z:.2}, N {})",
            est.value, est.std_error, est.n_events
        ),
    )
}

fn monte_carlo() -> Outcome {
    let start = Instant::now();
    let mode = LabMode::new(1.0).unwrap();
    let flat = SusceptibilitySpec::broadband(one());
    let mut checks = Vec::new();

    // broadband beta = 0.6: beat; mean rate 2.125
    let m = DetectorMotion::new(0.6).unwrap();
    let state = PhotonState::equal_superposition(0.0);
    let rec = simulate_clicks(&m, &mode, &flat, &state, 100.0, 500.0, 11).unwrap();
    let again = simulate_clicks(&m, &mode, &flat, &state, 100.0, 500.0, 11).unwrap();
    let deterministic = rec == again;
    let grid = Axis::new(1.0, 2.0, 801).unwrap().values();
    checks.push(z_line("A beat", &estimate_beat(&rec, &grid).unwrap(), 1.5));

    // broadband beta = 0.5: visibility over 1200 beat periods, bias from pure states
    let m = DetectorMotion::new(0.5).unwrap();
    let dw = doppler_splitting(&m, &mode);
    let t = 1200.0 * 2.0 * PI / dw;
    let rec = simulate_clicks(&m, &mode, &flat, &state, 50.0, t, 21).unwrap();
    checks.push(z_line(
        "B visibility",
        &estimate_visibility(&rec, dw).unwrap(),
        0.6,
    ));
    let p = simulate_clicks(&m, &mode, &flat, &PhotonState::plus(), 50.0, t, 22).unwrap();
    let q = simulate_clicks(&m, &mode, &flat, &PhotonState::minus(), 50.0, t, 23).unwrap();
    checks.push(z_line("B bias", &estimate_bias(&p, &q).unwrap(), -0.8));
    let smallest = p.len().min(q.len());

    // branch-tuned beta = 0.025, Q = 10: beat, visibility, bias
    let m = DetectorMotion::new(0.025).unwrap();
    let spec = branch_tuned_lorentzian(&m, &mode, one(), 0.1, Branch::Plus).unwrap();
    let amps = detection_amplitudes(&m, &mode, &spec).unwrap();
    let dw = amps.delta_omega();
    let t = 400.0 * 2.0 * PI / dw;
    let lambda0 = 0.012;
    let rec = simulate_clicks(&m, &mode, &spec, &state, lambda0, t, 31).unwrap();
    let step = PI / (2.0 * t);
    let n = (0.2 * dw / step) as usize + 1;
    let grid = Axis::new(0.9 * dw, 1.1 * dw, n).unwrap().values();
    checks.push(z_line("C beat", &estimate_beat(&rec, &grid).unwrap(), dw));
    checks.push(z_line(
        "C visibility",
        &estimate_visibility(&rec, dw).unwrap(),
        amps.visibility(),
    ));
    let p = simulate_clicks(&m, &mode, &spec, &PhotonState::plus(), lambda0, t, 32).unwrap();
    let q = simulate_clicks(&m, &mode, &spec, &PhotonState::minus(), lambda0, t, 33).unwrap();
    checks.push(z_line("C bias", &estimate_bias(&p, &q).unwrap(), amps.bias()));
    let smallest = smallest.min(p.len()).min(q.len());

    let (fast, time) = within_budget(start.elapsed(), 60.0);
    let all = checks.iter().all(|c| c.0);
    outcome(
        all && deterministic && smallest >= 100_000 && fast,
        format!(
            "{}; smallest record {smallest} events; same seed reproduces record: {deterministic}; {time}",
            checks.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join("; ")
        ),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn run_cli(threads: usize) -> BTreeMap<String, Vec<u8>> {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_photodet");
    let runs: [&[&str]; 2] = [
        &[
            "map",
            "--grid-bq",
            "0:2:128",
            "--grid-bwt",
            "0:6:128",
            "--out",
            "map.csv",
        ],
        &[
            "clicks",
            "--beta",
            "0.6",
            "--lambda0",
            "20",
            "--t-total",
            "500",
            "--gate-T",
            "2",
            "--gates",
            "50",
            "--seed",
            "5",
            "--out",
            "clicks.csv",
        ],
    ];
    for args in runs {
        let status = Command::new(exe)
            .current_dir(dir.path())
            .arg("--threads")
            .arg(threads.to_string())
            .args(args)
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&status.stderr)
        );
    }
    snapshot(dir.path())
}

fn determinism() -> Outcome {
    let a = run_cli(1);
    let b = run_cli(1);
    let c = run_cli(8);
    let names: Vec<&String> = a.keys().collect();
    let differing: Vec<&String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(v) || c.get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    let same_sets = a.len() == b.len() && a.len() == c.len();
    outcome(
        differing.is_empty() && same_sets && a.len() >= 9,
        format!(
            "{} files compared across two --threads 1 runs and one --threads 8 run {names:?}; differing: {differing:?}",
            a.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 complementarity", complementarity),
        ("2 broadband closed form", broadband_closed),
        ("3 lorentzian ratio equivalence", ratio_equivalence),
        ("4 onset landmark", onset_landmark),
        ("5 gate oracle", gate_oracle),
        ("6 unsharpness map", unsharpness_map),
        ("7 monte carlo round trip", monte_carlo),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {}",
            if result.passed { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
