//! The velocity-dependent single-click effect on the two-mode one-photon
//! subspace `{|+>, |->}`.
//!
//! A detector moving with velocity `beta` through two counterpropagating
//! modes of laboratory frequency `omega` sees the `+` and `-` alternatives at
//! `Omega_pm = gamma(1 -+ beta) omega` and weights them with
//! `g_pm = gamma (1 -+ beta) chi(Omega_pm)`. Everything observable about the
//! click effect follows from the complex pair `(g_plus, g_minus)`.
//!
//! Rates use the convention `rate = field_scale^2 * |amplitude|^2`, i.e. the
//! overall proportionality constant of the first-order count rate is fixed
//! to one.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinematics::{doppler_frequencies, doppler_splitting, DetectorMotion, LabMode};
use crate::response::SusceptibilitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionAmplitudes {
    g_plus: Complex64,
    g_minus: Complex64,
    delta_omega: f64,
    field_scale: f64,
}

impl DetectionAmplitudes {
    /// Builds amplitudes directly, bypassing the kinematics.
    pub fn from_parts(
        g_plus: Complex64,
        g_minus: Complex64,
        delta_omega: f64,
        field_scale: f64,
    ) -> Result<Self> {
        if g_plus == Complex64::new(0.0, 0.0) && g_minus == Complex64::new(0.0, 0.0) {
            return Err(Error::NullEffect);
        }
        if !g_plus.is_finite() || !g_minus.is_finite() {
            return Err(Error::InvalidParameter("non-finite detection amplitude".into()));
        }
        Ok(Self {
            g_plus,
            g_minus,
            delta_omega,
            field_scale,
        })
    }

    pub fn g_plus(&self) -> Complex64 {
        self.g_plus
    }

    pub fn g_minus(&self) -> Complex64 {
        self.g_minus
    }

    pub fn delta_omega(&self) -> f64 {
        self.delta_omega
    }

    pub fn field_scale(&self) -> f64 {
        self.field_scale
    }

    /// `|g_plus|` and `|g_minus|` rescaled so the larger one is 1.
    fn normalized_moduli(&self) -> (f64, f64) {
        let (a, b) = (self.g_plus.norm(), self.g_minus.norm());
        let m = a.max(b);
        (a / m, b / m)
    }

    pub fn visibility(&self) -> f64 {
        let (a, b) = self.normalized_moduli();
        2.0 * a * b / (a * a + b * b)
    }

    pub fn bias(&self) -> f64 {
        let (a, b) = self.normalized_moduli();
        (a - b) * (a + b) / (a * a + b * b)
    }

    /// `|g_minus| / |g_plus|`; infinite when `g_plus` vanishes.
    pub fn ratio(&self) -> f64 {
        self.g_minus.norm() / self.g_plus.norm()
    }

    /// `arg(conj(g_plus) * g_minus)`, the fringe phase offset.
    pub fn phase_offset(&self) -> f64 {
        (self.g_plus.conj() * self.g_minus).arg()
    }

    pub fn analyzer(&self) -> QubitAnalyzer {
        QubitAnalyzer {
            visibility: self.visibility(),
            bias: self.bias(),
            phase_offset: self.phase_offset(),
            delta_omega: self.delta_omega,
        }
    }

    /// `field_scale^2 (|g_plus|^2 + |g_minus|^2) / 2`.
    pub fn trace_weight(&self) -> f64 {
        0.5 * self.field_scale.powi(2) * (self.g_plus.norm_sqr() + self.g_minus.norm_sqr())
    }
}

/// `g_pm = gamma (1 -+ beta) chi(Omega_pm)` for a detector with the given
/// rest-frame response.
pub fn detection_amplitudes(
    motion: &DetectorMotion,
    mode: &LabMode,
    spec: &SusceptibilitySpec,
) -> Result<DetectionAmplitudes> {
    let (omega_plus, omega_minus) = doppler_frequencies(motion, mode);
    let (beta, gamma) = (motion.beta(), motion.gamma());
    let g_plus = gamma * (1.0 - beta) * spec.evaluate(omega_plus)?;
    let g_minus = gamma * (1.0 + beta) * spec.evaluate(omega_minus)?;
    DetectionAmplitudes::from_parts(
        g_plus,
        g_minus,
        doppler_splitting(motion, mode),
        mode.field_scale(),
    )
}

/// Normalized one-photon state `alpha_plus |+> + alpha_minus |->`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhotonState {
    alpha_plus: Complex64,
    alpha_minus: Complex64,
}

impl PhotonState {
    /// Normalizes the given amplitudes.
    pub fn new(alpha_plus: Complex64, alpha_minus: Complex64) -> Result<Self> {
        if !alpha_plus.is_finite() || !alpha_minus.is_finite() {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm = alpha_plus.norm().hypot(alpha_minus.norm());
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Ok(Self {
            alpha_plus: alpha_plus / norm,
            alpha_minus: alpha_minus / norm,
        })
    }

    /// `(|+> + e^{i phi} |->) / sqrt(2)`.
    pub fn equal_superposition(phi: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            alpha_plus: Complex64::new(s, 0.0),
            alpha_minus: Complex64::from_polar(s, phi),
        }
    }

    pub fn plus() -> Self {
        Self {
            alpha_plus: Complex64::new(1.0, 0.0),
            alpha_minus: Complex64::new(0.0, 0.0),
        }
    }

    pub fn minus() -> Self {
        Self {
            alpha_plus: Complex64::new(0.0, 0.0),
            alpha_minus: Complex64::new(1.0, 0.0),
        }
    }

    pub fn alpha_plus(&self) -> Complex64 {
        self.alpha_plus
    }

    pub fn alpha_minus(&self) -> Complex64 {
        self.alpha_minus
    }

    /// `(2 Re c, 2 Im c, |alpha_plus|^2 - |alpha_minus|^2)` with
    /// `c = conj(alpha_plus) alpha_minus`; `m_z > 0` favors `|+>`.
    pub fn bloch_vector(&self) -> [f64; 3] {
        let c = self.alpha_plus.conj() * self.alpha_minus;
        [
            2.0 * c.re,
            2.0 * c.im,
            self.alpha_plus.norm_sqr() - self.alpha_minus.norm_sqr(),
        ]
    }
}

/// Instantaneous proper-time click rate
/// `field_scale^2 |g_plus alpha_plus + g_minus alpha_minus e^{-i dOmega tau}|^2`.
pub fn click_rate(amps: &DetectionAmplitudes, state: &PhotonState, tau: f64) -> f64 {
    let beat = Complex64::from_polar(1.0, -amps.delta_omega * tau);
    let amplitude = amps.g_plus * state.alpha_plus + amps.g_minus * state.alpha_minus * beat;
    amps.field_scale.powi(2) * amplitude.norm_sqr()
}

/// Exact upper bound of [`click_rate`] over all proper times.
pub fn click_rate_ceiling(amps: &DetectionAmplitudes, state: &PhotonState) -> f64 {
    let a = amps.g_plus.norm() * state.alpha_plus.norm() + amps.g_minus.norm() * state.alpha_minus.norm();
    amps.field_scale.powi(2) * a * a
}

pub fn visibility(amps: &DetectionAmplitudes) -> f64 {
    amps.visibility()
}

pub fn bias(amps: &DetectionAmplitudes) -> f64 {
    amps.bias()
}

/// The normalized click effect as an analyzer on the propagation qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QubitAnalyzer {
    pub visibility: f64,
    pub bias: f64,
    pub phase_offset: f64,
    pub delta_omega: f64,
}

impl QubitAnalyzer {
    /// `Theta(tau) = dOmega tau - arg(conj(g_plus) g_minus)`.
    pub fn theta(&self, tau: f64) -> f64 {
        self.delta_omega * tau - self.phase_offset
    }

    /// Analyzer direction `(V cos Theta, V sin Theta, B)`.
    pub fn bloch_vector(&self, tau: f64) -> [f64; 3] {
        let (s, c) = self.theta(tau).sin_cos();
        [self.visibility * c, self.visibility * s, self.bias]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochEffect {
    pub n: [f64; 3],
    pub trace_weight: f64,
}

impl BlochEffect {
    /// `trace_weight (1 + n . m)`; equals [`click_rate`] for the state with
    /// Bloch vector `m`.
    pub fn rate_for(&self, state: &PhotonState) -> f64 {
        let m = state.bloch_vector();
        let dot: f64 = self.n.iter().zip(m.iter()).map(|(a, b)| a * b).sum();
        self.trace_weight * (1.0 + dot)
    }
}

pub fn bloch_effect(amps: &DetectionAmplitudes, tau: f64) -> BlochEffect {
    BlochEffect {
        n: amps.analyzer().bloch_vector(tau),
        trace_weight: amps.trace_weight(),
    }
}

/// Visibility and bias of a frequency-flat detector,
/// `((1 - beta^2)/(1 + beta^2), -2 beta/(1 + beta^2))`.
pub fn broadband_closed_form(beta: f64) -> Result<(f64, f64)> {
    DetectorMotion::new(beta)?;
    let b2 = beta * beta;
    Ok(((1.0 - b2) / (1.0 + b2), -2.0 * beta / (1.0 + b2)))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !kappa.is_finite() || kappa <= 0.0 {
        return Err(Error::NonPositiveWidth(kappa));
    }
    Ok(())
}

/// `|g_minus| / |g_plus|` for a Lorentzian centred anywhere, in closed form.
pub fn amplitude_ratio_general(
    motion: &DetectorMotion,
    mode: &LabMode,
    omega0: f64,
    kappa: f64,
) -> Result<f64> {
    check_kappa(kappa)?;
    let (omega_plus, omega_minus) = doppler_frequencies(motion, mode);
    let beta = motion.beta();
    let hw2 = (0.5 * kappa).powi(2);
    let num = hw2 + (omega_plus - omega0).powi(2);
    let den = hw2 + (omega_minus - omega0).powi(2);
    Ok((1.0 + beta) / (1.0 - beta) * (num / den).sqrt())
}

/// `|g_minus| / |g_plus|` for a Lorentzian tuned onto the `+` branch:
/// `[(1 + beta)/(1 - beta)] / sqrt(1 + (4 gamma beta omega / kappa)^2)`.
pub fn amplitude_ratio_branch_tuned(motion: &DetectorMotion, mode: &LabMode, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let beta = motion.beta();
    let x = 4.0 * motion.gamma() * beta * mode.omega() / kappa;
    Ok((1.0 + beta) / (1.0 - beta) / x.hypot(1.0))
}

/// `(V, |B|) = (2r/(1 + r^2), |1 - r^2|/(1 + r^2))` for `r = |g_minus|/|g_plus|`.
pub fn vb_from_ratio(r: f64) -> Result<(f64, f64)> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::NonPositiveRatio(r));
    }
    // symmetric under r -> 1/r; work with the branch r <= 1
    let s = if r > 1.0 { 1.0 / r } else { r };
    let d = 1.0 + s * s;
    Ok((2.0 * s / d, (1.0 - s) * (1.0 + s) / d))
}

/// Onset velocity `1/(4Q)` of spectral direction selectivity. The result is
/// not checked against the velocity guard.
pub fn crossover_beta(q: f64) -> Result<f64> {
    if !q.is_finite() || q <= 0.0 {
        return Err(Error::NonPositiveQ(q));
    }
    Ok(0.25 / q)
}
