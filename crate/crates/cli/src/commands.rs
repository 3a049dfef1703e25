use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use photodet::clicksim::{
    estimate_beat, estimate_bias, estimate_gated_visibility, estimate_visibility, simulate_clicks,
    simulate_gated_sweep, substream_seed, CountRecord, EstimateWithError, DEFAULT_PHI_STEPS, MIN_EVENTS,
};
use photodet::gating::{observed_visibility, unsharpness_check, visibility_map, Axis};
use photodet::io::{fmt6, sidecar_path, write_json};
use photodet::kinematics::doppler_frequencies;
use photodet::povm::{bloch_effect, broadband_closed_form, crossover_beta, detection_amplitudes};
use photodet::{Branch, Error, LabMode, PhotonState};
use serde::Serialize;
use serde_json::json;

use crate::config::{self, merge_with_file, ClicksArgs, MapArgs, Model, PovmArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or model parameters.
    Validation(String),
    /// A computation failed or a check did not pass.
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => CliError::Io(e.to_string()),
            Error::NullEffect
            | Error::DegenerateRate
            | Error::SingularFit
            | Error::TooFewEvents { .. }
            | Error::BeatOutOfGrid { .. }
            | Error::InconsistentBeat { .. }
            | Error::FrequencyOutOfTable { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_with<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    body(&mut out).and_then(|_| out.flush()).map_err(io_err(path))
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_json(path, value).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct PovmReport {
    beta: f64,
    gamma: f64,
    omega: f64,
    omega_plus: f64,
    omega_minus: f64,
    delta_omega: f64,
    g_plus: [f64; 2],
    g_minus: [f64; 2],
    ratio: f64,
    visibility: f64,
    bias: f64,
    phase_offset: f64,
    analyzer_at_zero: [f64; 3],
    trace_weight: f64,
    state_bloch: [f64; 3],
    broadband: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    tuning: Option<Branch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crossover_beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gate: Option<GateReport>,
    software: String,
}

#[derive(Serialize)]
struct GateReport {
    duration: f64,
    v_obs: f64,
    unsharpness: f64,
    unsharpness_ok: bool,
}

pub fn povm(args: PovmArgs) -> Result<(), CliError> {
    let args = merge_with_file(args)?;
    let model = args.model.resolve()?;
    let phi = config::phi(args.phi)?;
    let window = config::gate(args.gate_t)?;
    let Model {
        motion,
        mode,
        spec,
        lorentzian,
        tuning,
    } = &model;

    let amps = detection_amplitudes(motion, mode, spec)?;
    let (omega_plus, omega_minus) = doppler_frequencies(motion, mode);
    let n0 = bloch_effect(&amps, 0.0).n;
    let broadband = broadband_closed_form(motion.beta())?;
    let q = lorentzian.map(|(_, kappa)| mode.omega() / kappa);
    let crossover = q.map(crossover_beta).transpose()?;
    let gate = match window {
        Some(w) => {
            let v_obs = observed_visibility(&amps.analyzer(), motion, mode, &w)?;
            let (unsharpness, unsharpness_ok) = unsharpness_check(v_obs, amps.bias());
            Some(GateReport {
                duration: w.duration(),
                v_obs,
                unsharpness,
                unsharpness_ok,
            })
        }
        None => None,
    };
    let c = |z: num_complex::Complex64| [z.re, z.im];
    let report = PovmReport {
        beta: motion.beta(),
        gamma: motion.gamma(),
        omega: mode.omega(),
        omega_plus,
        omega_minus,
        delta_omega: amps.delta_omega(),
        g_plus: c(amps.g_plus()),
        g_minus: c(amps.g_minus()),
        ratio: amps.ratio(),
        visibility: amps.visibility(),
        bias: amps.bias(),
        phase_offset: amps.phase_offset(),
        analyzer_at_zero: n0,
        trace_weight: amps.trace_weight(),
        state_bloch: PhotonState::equal_superposition(phi).bloch_vector(),
        broadband,
        tuning: *tuning,
        q,
        crossover_beta: crossover,
        gate,
        software: photodet::software_version(),
    };

    let cx = |z: [f64; 2]| {
        let sign = if z[1].is_sign_negative() { '-' } else { '+' };
        format!("{} {sign} {}i", fmt6(z[0]), fmt6(z[1].abs()))
    };
    let v3 = |v: [f64; 3]| format!("({}, {}, {})", fmt6(v[0]), fmt6(v[1]), fmt6(v[2]));
    println!(
        "beta            {}   gamma {}",
        fmt6(report.beta),
        fmt6(report.gamma)
    );
    println!(
        "Omega_+/Omega_- {} / {}   dOmega {}",
        fmt6(omega_plus),
        fmt6(omega_minus),
        fmt6(report.delta_omega)
    );
    println!("g_+             {}", cx(report.g_plus));
    println!("g_-             {}", cx(report.g_minus));
    println!("|g_+/g_-|       {}", fmt6(report.ratio));
    println!("V               {}", fmt6(report.visibility));
    println!("B               {}", fmt6(report.bias));
    println!("n(tau=0)        {}", v3(n0));
    println!("trace weight    {}", fmt6(report.trace_weight));
    println!("state m(phi)    {}", v3(report.state_bloch));
    println!("broadband V, B  {}, {}", fmt6(broadband.0), fmt6(broadband.1));
    if let (Some(q), Some(bc)) = (q, crossover) {
        let tuned = match tuning {
            Some(Branch::Plus) => "tuned to Omega_+",
            Some(Branch::Minus) => "tuned to Omega_-",
            None => "fixed resonance",
        };
        println!(
            "Q               {}   crossover beta {}   ({tuned})",
            fmt6(q),
            fmt6(bc)
        );
    }
    if let Some(g) = &report.gate {
        println!(
            "gate T          {}   V_obs {}   V_obs^2+B^2 {} ({})",
            fmt6(g.duration),
            fmt6(g.v_obs),
            fmt6(g.unsharpness),
            if g.unsharpness_ok { "ok" } else { "VIOLATED" }
        );
    }
    if let Some(out) = &args.out {
        save_json(out, &report)?;
    }
    if report.gate.as_ref().is_some_and(|g| !g.unsharpness_ok) {
        return Err(CliError::Numerical("unsharpness bound violated".into()));
    }
    Ok(())
}

pub fn map(args: MapArgs) -> Result<(), CliError> {
    let args = merge_with_file(args)?;
    let q = config::positive_or("q", args.q, 10.0)?;
    let mode = LabMode::new(config::positive_or("omega", args.omega, 1.0)?)?;
    let bq: Axis = config::axis("grid-bq", args.grid_bq.as_deref(), "0:2:64")?;
    let bwt: Axis = config::axis("grid-bwt", args.grid_bwt.as_deref(), "0:6:64")?;
    if bq.max / q >= 1.0 {
        return Err(CliError::Validation(format!(
            "--grid-bq max {} reaches beta >= 1 at Q = {q}",
            bq.max
        )));
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from("map.csv"));
    let grid = visibility_map(&bq.values(), &bwt.values(), q, &mode)?;
    write_with(&out, |w| grid.write_csv(w))?;
    let meta = sidecar_path(&out);
    save_json(&meta, &grid.metadata)?;
    let worst = grid
        .row_bias
        .iter()
        .enumerate()
        .flat_map(|(i, b)| (0..bwt.n).map(move |j| (i, j, *b)))
        .map(|(i, j, b)| unsharpness_check(grid.get(i, j), b))
        .fold((f64::MIN, true), |acc, (lhs, ok)| (acc.0.max(lhs), acc.1 && ok));
    println!(
        "wrote {} ({}x{} cells) and {}; max V_obs^2+B^2 = {}",
        out.display(),
        bq.n,
        bwt.n,
        meta.display(),
        fmt6(worst.0)
    );
    if !worst.1 {
        return Err(CliError::Numerical("unsharpness bound violated in map".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateLine {
    quantity: &'static str,
    target: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<EstimateWithError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
}

impl EstimateLine {
    fn new(quantity: &'static str, target: f64, result: Result<EstimateWithError, String>) -> Self {
        match result {
            Ok(est) => Self {
                quantity,
                target,
                z: Some(est.z_score(target)),
                estimate: Some(est),
                skipped: None,
            },
            Err(reason) => Self {
                quantity,
                target,
                estimate: None,
                z: None,
                skipped: Some(reason),
            },
        }
    }

    fn print(&self) {
        match (&self.estimate, &self.skipped) {
            (Some(e), _) => println!(
                "{:<12} estimate {} +- {}   target {}   |z| {:.2}",
                self.quantity,
                fmt6(e.value),
                fmt6(e.std_error),
                fmt6(self.target),
                self.z.unwrap_or(f64::NAN)
            ),
            (None, Some(reason)) => println!(
                "{:<12} skipped ({reason})   target {}",
                self.quantity,
                fmt6(self.target)
            ),
            (None, None) => unreachable!(),
        }
    }
}

/// `path` with `.tag` inserted before its extension.
fn tagged(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy())
        .unwrap_or("csv".into());
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

fn enough_events(rec: &CountRecord) -> Result<(), String> {
    if rec.len() < MIN_EVENTS {
        Err(format!("{} events, need {MIN_EVENTS}", rec.len()))
    } else {
        Ok(())
    }
}

fn beat_grid(spec: Option<&str>, dw: f64, t_total: f64) -> Result<Vec<f64>, CliError> {
    if let Some(text) = spec {
        return Ok(config::axis("grid-freq", Some(text), "")?.values());
    }
    let (lo, hi) = (0.5 * dw, 1.5 * dw);
    let n = (((hi - lo) / (PI / (4.0 * t_total))).ceil() as usize + 1).clamp(3, 1 << 20);
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

pub fn clicks(args: ClicksArgs) -> Result<(), CliError> {
    let args = merge_with_file(args)?;
    let model = args.model.resolve()?;
    let phi = config::phi(args.phi)?;
    let lambda0 = config::positive_or("lambda0", args.lambda0, 1.0)?;
    let t_total = config::positive_or("t-total", args.t_total, 1000.0)?;
    let seed = args.seed.unwrap_or(0);
    let window = config::gate(args.gate_t)?;
    let gates = args.gates.unwrap_or(200);
    if gates == 0 {
        return Err(CliError::Validation("--gates must be at least 1".into()));
    }
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("clicks.csv"));
    let Model {
        motion, mode, spec, ..
    } = &model;
    let amps = detection_amplitudes(motion, mode, spec)?;
    let dw = amps.delta_omega().abs();

    let sim = |state: PhotonState, index: u64| {
        simulate_clicks(
            motion,
            mode,
            spec,
            &state,
            lambda0,
            t_total,
            substream_seed(seed, index),
        )
    };
    let (main, (plus, minus)) = rayon::join(
        || sim(PhotonState::equal_superposition(phi), 0),
        || rayon::join(|| sim(PhotonState::plus(), 1), || sim(PhotonState::minus(), 2)),
    );
    let main = main?;
    main.save(&out)?;
    let mut files = vec![out.clone(), sidecar_path(&out)];
    for (rec, tag) in [(&plus, "plus"), (&minus, "minus")] {
        if let Ok(rec) = rec {
            let path = tagged(&out, tag);
            rec.save(&path)?;
            files.push(sidecar_path(&path));
            files.push(path);
        }
    }
    println!(
        "{} events in [0, {}] (lambda0 {}, seed {}), wrote {}",
        main.len(),
        fmt6(t_total),
        fmt6(lambda0),
        seed,
        out.display()
    );

    let beat = EstimateLine::new(
        "beat",
        dw,
        if dw == 0.0 {
            Err("no Doppler splitting at beta = 0".into())
        } else {
            enough_events(&main).and_then(|_| {
                let grid = beat_grid(args.grid_freq.as_deref(), dw, t_total).map_err(|e| e.to_string())?;
                estimate_beat(&main, &grid).map_err(|e| e.to_string())
            })
        },
    );
    let vis = EstimateLine::new(
        "visibility",
        amps.visibility(),
        if dw == 0.0 {
            Err("no Doppler splitting at beta = 0".into())
        } else {
            enough_events(&main).and_then(|_| estimate_visibility(&main, dw).map_err(|e| e.to_string()))
        },
    );
    let bias = EstimateLine::new(
        "bias",
        amps.bias(),
        match (&plus, &minus) {
            (Ok(p), Ok(m)) => estimate_bias(p, m).map_err(|e| e.to_string()),
            (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
        },
    );
    let mut lines = vec![beat, vis, bias];
    if let Some(w) = window {
        let target = observed_visibility(&amps.analyzer(), motion, mode, &w)?;
        let result = simulate_gated_sweep(
            motion,
            mode,
            spec,
            &w,
            lambda0,
            gates,
            DEFAULT_PHI_STEPS,
            seed ^ (1 << 32),
        )
        .and_then(|s| estimate_gated_visibility(&s))
        .map_err(|e| e.to_string());
        lines.push(EstimateLine::new("gated V_obs", target, result));
    }
    for line in &lines {
        line.print();
    }

    let report_path = tagged(&out, "report").with_extension("json");
    let report = json!({
        "params_fingerprint": main.params_fingerprint(),
        "n_events": main.len(),
        "files": files,
        "estimates": lines,
        "gate_T": window.map(|w| w.duration()),
        "gates_per_phi": window.map(|_| gates),
        "software": photodet::software_version(),
    });
    save_json(&report_path, &report)?;
    Ok(())
}

pub fn selfcheck() -> Result<(), CliError> {
    let outcomes = photodet::selfcheck::run_all();
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    for o in &outcomes {
        println!(
            "{} {}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    println!("{}/{} checks passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} check(s) failed")));
    }
    Ok(())
}
