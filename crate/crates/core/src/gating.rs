//! Finite-time integration of the click rate.
//!
//! Averaging the rate over a proper-time gate of length `T` multiplies the
//! interference term by the gate average of `e^{-i dOmega tau}`. For a
//! rectangular gate that is `e^{-i dOmega T/2} sinc(dOmega T/2)`, which
//! shrinks the transverse part of the analyzer and leaves the bias alone.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::kinematics::{doppler_splitting, Branch, DetectorMotion, LabMode};
use crate::povm::{detection_amplitudes, QubitAnalyzer};
use crate::response::branch_tuned_lorentzian;

/// Slack allowed on `V_obs^2 + B^2 <= 1`.
pub const UNSHARPNESS_SLACK: f64 = 1e-12;

/// Relative tolerance when comparing an analyzer's beat to the kinematics.
pub const BEAT_CONSISTENCY_TOL: f64 = 1e-9;

/// `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GateShape {
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateWindow {
    shape: GateShape,
    duration: f64,
}

impl GateWindow {
    pub fn rectangular(duration: f64) -> Result<Self> {
        if !duration.is_finite() || duration <= 0.0 {
            return Err(Error::InvalidDuration(duration));
        }
        Ok(Self {
            shape: GateShape::Rectangular,
            duration,
        })
    }

    pub fn shape(&self) -> GateShape {
        self.shape
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Normalized gate weight at proper time `tau`.
    fn weight(&self, tau: f64) -> f64 {
        match self.shape {
            GateShape::Rectangular => {
                if (0.0..=self.duration).contains(&tau) {
                    1.0 / self.duration
                } else {
                    0.0
                }
            }
        }
    }
}

/// Closed-form gate average of `e^{-i dOmega tau}`.
pub fn gate_average_closed(delta_omega: f64, window: &GateWindow) -> Complex64 {
    match window.shape {
        GateShape::Rectangular => {
            let half = 0.5 * delta_omega * window.duration;
            Complex64::from_polar(1.0, -half) * sinc(half)
        }
    }
}

/// Composite Simpson estimate of the same gate average. An odd `steps` is
/// rounded up to the next even number.
pub fn gate_average_numeric(delta_omega: f64, window: &GateWindow, steps: usize) -> Result<Complex64> {
    const MIN_STEPS: usize = 16;
    if steps < MIN_STEPS {
        return Err(Error::TooFewSteps {
            got: steps,
            min: MIN_STEPS,
        });
    }
    let n = steps + steps % 2;
    let t = window.duration;
    let h = t / n as f64;
    let f = |i: usize| {
        let tau = if i == n { t } else { h * i as f64 };
        Complex64::from_polar(window.weight(tau), -delta_omega * tau)
    };
    let mut sum = f(0) + f(n);
    for i in 1..n {
        sum += f(i) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok(sum * (h / 3.0))
}

/// Gated visibility `V |sinc(gamma beta omega T)|`.
pub fn observed_visibility(
    analyzer: &QubitAnalyzer,
    motion: &DetectorMotion,
    mode: &LabMode,
    window: &GateWindow,
) -> Result<f64> {
    let expected = doppler_splitting(motion, mode);
    let scale = expected.abs().max(f64::MIN_POSITIVE);
    if (analyzer.delta_omega - expected).abs() > BEAT_CONSISTENCY_TOL * scale
        && !(expected == 0.0 && analyzer.delta_omega == 0.0)
    {
        return Err(Error::InconsistentBeat {
            analyzer: analyzer.delta_omega,
            expected,
        });
    }
    Ok(analyzer.visibility * gate_average_closed(expected, window).norm())
}

/// Returns `(V_obs^2 + B^2, V_obs^2 + B^2 <= 1 + slack)`.
pub fn unsharpness_check(v_obs: f64, bias: f64) -> (f64, bool) {
    let lhs = v_obs * v_obs + bias * bias;
    (lhs, lhs <= 1.0 + UNSHARPNESS_SLACK)
}

/// A closed grid `min, min + step, ..., max` with `n` points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidAxis("non-finite bound".into()));
        }
        if n == 0 {
            return Err(Error::InvalidAxis("axis needs at least one point".into()));
        }
        if n == 1 && min != max {
            return Err(Error::InvalidAxis(format!(
                "single-point axis needs min == max, got {min}:{max}"
            )));
        }
        if n > 1 && max <= min {
            return Err(Error::InvalidAxis(format!("max {max} must exceed min {min}")));
        }
        Ok(Self { min, max, n })
    }

    /// Parses `MIN:MAX:N`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::InvalidAxis(format!("expected MIN:MAX:N, got {text:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let min = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
        let max = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
        let n = parts[2].trim().parse::<usize>().map_err(|_| bad())?;
        Self::new(min, max, n)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.n - 1) as f64;
        (0..self.n)
            .map(|i| {
                if i + 1 == self.n {
                    self.max
                } else {
                    self.min + step * i as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapMetadata {
    pub q: f64,
    pub omega: f64,
    pub chi0: [f64; 2],
    pub tuning: Branch,
    pub beta_q_axis: Vec<f64>,
    pub beta_omega_t_axis: Vec<f64>,
    pub row_order: &'static str,
    pub rate_convention: &'static str,
    pub gate: GateShape,
    pub software: String,
}

/// Observed visibility over (beta Q, beta omega T).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityMapGrid {
    pub beta_q_axis: Vec<f64>,
    pub beta_omega_t_axis: Vec<f64>,
    /// Row-major: `values[i * beta_omega_t_axis.len() + j]`.
    pub values: Vec<f64>,
    /// Ungated `V` and signed `B` for each beta Q row.
    pub row_visibility: Vec<f64>,
    pub row_bias: Vec<f64>,
    pub metadata: MapMetadata,
}

impl VisibilityMapGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.beta_omega_t_axis.len() + j]
    }

    /// CSV with header `beta_q,beta_omega_t,v_obs`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "beta_q,beta_omega_t,v_obs")?;
        for (i, bq) in self.beta_q_axis.iter().enumerate() {
            for (j, bwt) in self.beta_omega_t_axis.iter().enumerate() {
                writeln!(out, "{},{},{}", fmt17(*bq), fmt17(*bwt), fmt17(self.get(i, j)))?;
            }
        }
        Ok(())
    }
}

fn check_axis(values: &[f64], name: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidAxis(format!("{name} is empty")));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidAxis(format!(
            "{name} must be finite and nonnegative"
        )));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidAxis(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// Observed-visibility map for a Lorentzian (`chi0 = 1`, `kappa = omega/Q`)
/// retuned onto the `+` branch at every velocity.
///
/// Cell `(i, j)` uses `beta = beta_q[i] / Q` and a gate with
/// `beta omega T = beta_omega_t[j]`, so the gate factor is
/// `|sinc(gamma * beta_omega_t[j])|`. This stays well defined as
/// `beta -> 0`, where `T` itself diverges.
pub fn visibility_map(
    beta_q_axis: &[f64],
    beta_omega_t_axis: &[f64],
    q: f64,
    mode: &LabMode,
) -> Result<VisibilityMapGrid> {
    if !q.is_finite() || q <= 0.0 {
        return Err(Error::NonPositiveQ(q));
    }
    check_axis(beta_q_axis, "beta Q axis")?;
    check_axis(beta_omega_t_axis, "beta omega T axis")?;
    let kappa = mode.omega() / q;
    let chi0 = Complex64::new(1.0, 0.0);

    let rows: Vec<(f64, f64, f64)> = beta_q_axis
        .par_iter()
        .map(|&bq| {
            let motion = DetectorMotion::new(bq / q)?;
            let spec = branch_tuned_lorentzian(&motion, mode, chi0, kappa, Branch::Plus)?;
            let amps = detection_amplitudes(&motion, mode, &spec)?;
            Ok((motion.gamma(), amps.visibility(), amps.bias()))
        })
        .collect::<Result<_>>()?;

    let values: Vec<f64> = rows
        .par_iter()
        .flat_map_iter(|&(gamma, v, _)| {
            beta_omega_t_axis
                .iter()
                .map(move |&bwt| v * sinc(gamma * bwt).abs())
        })
        .collect();

    Ok(VisibilityMapGrid {
        beta_q_axis: beta_q_axis.to_vec(),
        beta_omega_t_axis: beta_omega_t_axis.to_vec(),
        values,
        row_visibility: rows.iter().map(|r| r.1).collect(),
        row_bias: rows.iter().map(|r| r.2).collect(),
        metadata: MapMetadata {
            q,
            omega: mode.omega(),
            chi0: [chi0.re, chi0.im],
            tuning: Branch::Plus,
            beta_q_axis: beta_q_axis.to_vec(),
            beta_omega_t_axis: beta_omega_t_axis.to_vec(),
            row_order: "beta_q outer, beta_omega_t inner",
            rate_convention: "rate = field_scale^2 |amplitude|^2 (proportionality constant 1)",
            gate: GateShape::Rectangular,
            software: crate::software_version(),
        },
    })
}
