//! Windowed counting without phase conditioning.
//!
//! Each trial counts the clicks inside one gate `[0, T]` that starts at the
//! same beat phase. Sweeping the relative photon phase `phi` and fitting the
//! total counts to `a + b cos phi + c sin phi` gives the observed fringe
//! contrast, which targets `V |sinc(gamma beta omega T)|`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::estimate::fit_fringe;
use super::{check_sim_inputs, sample_event_times, substream_seed, EstimateWithError, RNG_ALGORITHM};
use crate::error::{Error, Result};
use crate::gating::GateWindow;
use crate::kinematics::{DetectorMotion, LabMode};
use crate::povm::{click_rate_ceiling, detection_amplitudes, PhotonState};
use crate::response::SusceptibilitySpec;

pub const DEFAULT_PHI_STEPS: usize = 12;

/// Total gated counts for each relative phase of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GatedSweep {
    pub phis: Vec<f64>,
    pub counts: Vec<u64>,
    pub gates_per_phi: usize,
    pub window: GateWindow,
    pub lambda0: f64,
    pub seed: u64,
    pub rng: &'static str,
}

/// Runs `gates_per_phi` independent gate trials at each of `phi_steps`
/// equally spaced phases. Trial `g` at phase index `k` uses substream
/// `k * gates_per_phi + g`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_gated_sweep(
    motion: &DetectorMotion,
    mode: &LabMode,
    spec: &SusceptibilitySpec,
    window: &GateWindow,
    lambda0: f64,
    gates_per_phi: usize,
    phi_steps: usize,
    seed: u64,
) -> Result<GatedSweep> {
    check_sim_inputs(lambda0, window.duration())?;
    if gates_per_phi == 0 {
        return Err(Error::InvalidParameter("need at least one gate per phase".into()));
    }
    if phi_steps < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 phase steps, got {phi_steps}"
        )));
    }
    let amps = detection_amplitudes(motion, mode, spec)?;
    let phis: Vec<f64> = (0..phi_steps)
        .map(|k| 2.0 * PI * k as f64 / phi_steps as f64)
        .collect();
    let counts = phis
        .iter()
        .enumerate()
        .map(|(k, &phi)| {
            let state = PhotonState::equal_superposition(phi);
            if click_rate_ceiling(&amps, &state) <= 0.0 {
                return Err(Error::DegenerateRate);
            }
            let total = (0..gates_per_phi)
                .into_par_iter()
                .map(|g| {
                    let index = (k * gates_per_phi + g) as u64;
                    let mut rng = ChaCha20Rng::seed_from_u64(substream_seed(seed, index));
                    sample_event_times(&amps, &state, lambda0, window.duration(), &mut rng).len() as u64
                })
                .sum::<u64>();
            Ok(total)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GatedSweep {
        phis,
        counts,
        gates_per_phi,
        window: *window,
        lambda0,
        seed,
        rng: RNG_ALGORITHM,
    })
}

/// Fringe contrast of the swept counts with its standard error.
pub fn estimate_gated_visibility(sweep: &GatedSweep) -> Result<EstimateWithError> {
    let counts: Vec<f64> = sweep.counts.iter().map(|&c| c as f64).collect();
    let total: u64 = sweep.counts.iter().sum();
    if (total as usize) < super::MIN_EVENTS {
        return Err(Error::TooFewEvents {
            got: total as usize,
            min: super::MIN_EVENTS,
        });
    }
    let (value, std_error) = fit_fringe(&sweep.phis, &counts)?;
    Ok(EstimateWithError {
        value,
        std_error,
        n_events: total as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gating::{observed_visibility, GateWindow};
    use num_complex::Complex64;

    #[test]
    fn gated_contrast_tracks_sinc() {
        let motion = DetectorMotion::new(0.3).unwrap();
        let mode = LabMode::new(1.0).unwrap();
        let spec = SusceptibilitySpec::broadband(Complex64::new(1.0, 0.0));
        let amps = detection_amplitudes(&motion, &mode, &spec).unwrap();
        let t = 1.2 / (motion.gamma() * motion.beta());
        let window = GateWindow::rectangular(t).unwrap();
        let target = observed_visibility(&amps.analyzer(), &motion, &mode, &window).unwrap();
        let sweep = simulate_gated_sweep(&motion, &mode, &spec, &window, 50.0, 400, 12, 99).unwrap();
        let est = estimate_gated_visibility(&sweep).unwrap();
        assert!(est.z_score(target) < 4.0, "{est:?} vs {target}");
        assert!((est.value - amps.visibility()).abs() > 4.0 * est.std_error);
    }

    #[test]
    fn sweep_is_deterministic() {
        let motion = DetectorMotion::new(0.2).unwrap();
        let mode = LabMode::new(1.0).unwrap();
        let spec = SusceptibilitySpec::broadband(Complex64::new(1.0, 0.0));
        let window = GateWindow::rectangular(3.0).unwrap();
        let a = simulate_gated_sweep(&motion, &mode, &spec, &window, 5.0, 20, 12, 4).unwrap();
        let b = simulate_gated_sweep(&motion, &mode, &spec, &window, 5.0, 20, 12, 4).unwrap();
        assert_eq!(a, b);
        assert!(simulate_gated_sweep(&motion, &mode, &spec, &window, 5.0, 0, 12, 4).is_err());
    }
}
