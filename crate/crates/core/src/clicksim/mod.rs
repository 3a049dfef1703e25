//! Synthetic click records drawn from the instantaneous click rate, and
//! estimators that recover the beat frequency, visibility and bias.
//!
//! Records are inhomogeneous Poisson processes with intensity
//! `lambda0 * click_rate(tau)`, sampled by thinning against the exact rate
//! ceiling. Each record is driven by its own ChaCha20 stream seeded from a
//! 64-bit seed, so a record depends only on its inputs and seed.

mod estimate;
mod gated;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Exp1;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{fmt17, sidecar_path, write_json};
use crate::kinematics::{DetectorMotion, LabMode};
use crate::povm::{click_rate, click_rate_ceiling, detection_amplitudes, DetectionAmplitudes, PhotonState};
use crate::response::SusceptibilitySpec;

pub use estimate::{
    estimate_beat, estimate_bias, estimate_visibility, estimate_visibility_binned, periodogram,
    DEFAULT_PHASE_BINS, MIN_EVENTS,
};
pub use gated::{estimate_gated_visibility, simulate_gated_sweep, GatedSweep, DEFAULT_PHI_STEPS};

/// Identifier of the generator behind every record.
pub const RNG_ALGORITHM: &str = "chacha20 (rand_chacha 0.9, seed_from_u64)";

/// Seed of the `index`-th independent substream derived from `seed`.
pub fn substream_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}

/// Everything that determines a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationParams {
    pub motion: DetectorMotion,
    pub mode: LabMode,
    pub spec: SusceptibilitySpec,
    pub state: PhotonState,
    pub lambda0: f64,
    pub t_total: f64,
    pub seed: u64,
    pub rng: &'static str,
}

impl GenerationParams {
    fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("generation params serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Differences other than the photon state and the seed.
    fn setup_mismatch(&self, other: &Self) -> Option<String> {
        let mut diffs = Vec::new();
        if self.motion != other.motion {
            diffs.push("velocity");
        }
        if self.mode != other.mode {
            diffs.push("lab mode");
        }
        if self.spec != other.spec {
            diffs.push("susceptibility");
        }
        if self.lambda0 != other.lambda0 {
            diffs.push("lambda0");
        }
        if self.t_total != other.t_total {
            diffs.push("t_total");
        }
        (!diffs.is_empty()).then(|| diffs.join(", "))
    }
}

/// Sorted detection times in `[0, t_total]` with their generation record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRecord {
    event_times: Vec<f64>,
    params: GenerationParams,
    params_fingerprint: String,
}

#[derive(Serialize)]
struct RecordSidecar<'a> {
    params: &'a GenerationParams,
    params_fingerprint: &'a str,
    n_events: usize,
    rate_convention: &'static str,
    software: String,
}

impl CountRecord {
    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn len(&self) -> usize {
        self.event_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.event_times.is_empty()
    }

    pub fn t_total(&self) -> f64 {
        self.params.t_total
    }

    pub fn rate_scale(&self) -> f64 {
        self.params.lambda0
    }

    pub fn seed(&self) -> u64 {
        self.params.seed
    }

    pub fn params(&self) -> &GenerationParams {
        &self.params
    }

    pub fn params_fingerprint(&self) -> &str {
        &self.params_fingerprint
    }

    /// One `tau` per row, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tau")?;
        for t in &self.event_times {
            writeln!(out, "{}", fmt17(*t))?;
        }
        Ok(())
    }

    /// Writes `path` (CSV) and the JSON sidecar next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()?;
        write_json(
            &sidecar_path(path),
            &RecordSidecar {
                params: &self.params,
                params_fingerprint: &self.params_fingerprint,
                n_events: self.len(),
                rate_convention: "intensity = lambda0 * field_scale^2 |amplitude|^2",
                software: crate::software_version(),
            },
        )
    }
}

/// A value estimated from click data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub n_events: usize,
}

impl EstimateWithError {
    /// `|value - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target).abs() / self.std_error
    }
}

/// Thinning sampler for `lambda0 * click_rate(tau)` on `[0, t_total]`.
pub(crate) fn sample_event_times(
    amps: &DetectionAmplitudes,
    state: &PhotonState,
    lambda0: f64,
    t_total: f64,
    rng: &mut ChaCha20Rng,
) -> Vec<f64> {
    let ceiling = lambda0 * click_rate_ceiling(amps, state);
    let mut events = Vec::with_capacity((ceiling * t_total).min(1e8) as usize);
    let mut tau = 0.0_f64;
    loop {
        let gap: f64 = rng.sample(Exp1);
        tau += gap / ceiling;
        if tau > t_total {
            break;
        }
        let u: f64 = rng.random();
        if u * ceiling < lambda0 * click_rate(amps, state, tau)
            && events.last().is_none_or(|&last| tau > last)
        {
            events.push(tau);
        }
    }
    events
}

pub(crate) fn check_sim_inputs(lambda0: f64, t_total: f64) -> Result<()> {
    if !lambda0.is_finite() || lambda0 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda0 must be positive, got {lambda0}"
        )));
    }
    if !t_total.is_finite() || t_total <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "t_total must be positive, got {t_total}"
        )));
    }
    Ok(())
}

/// Draws a click record with intensity `lambda0 * click_rate(tau)`.
///
/// Fails with [`Error::DegenerateRate`] only when the rate ceiling is zero;
/// a rate that vanishes through interference yields an empty record.
pub fn simulate_clicks(
    motion: &DetectorMotion,
    mode: &LabMode,
    spec: &SusceptibilitySpec,
    state: &PhotonState,
    lambda0: f64,
    t_total: f64,
    seed: u64,
) -> Result<CountRecord> {
    check_sim_inputs(lambda0, t_total)?;
    let amps = detection_amplitudes(motion, mode, spec)?;
    let params = GenerationParams {
        motion: *motion,
        mode: *mode,
        spec: spec.clone(),
        state: *state,
        lambda0,
        t_total,
        seed,
        rng: RNG_ALGORITHM,
    };
    let ceiling = lambda0 * click_rate_ceiling(&amps, state);
    if ceiling.is_nan() || ceiling <= 0.0 {
        return Err(Error::DegenerateRate);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let event_times = sample_event_times(&amps, state, lambda0, t_total, &mut rng);
    Ok(CountRecord {
        event_times,
        params_fingerprint: params.fingerprint(),
        params,
    })
}
