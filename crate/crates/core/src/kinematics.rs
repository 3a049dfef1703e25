//! Relativistic kinematics of a detector in uniform motion along the x axis.
//!
//! Natural units with c = 1 are used throughout, so a laboratory mode of
//! angular frequency `omega` has wave number `k = omega`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Velocities must satisfy `|beta| < 1 - VELOCITY_GUARD`.
pub const VELOCITY_GUARD: f64 = 1e-9;

/// Lorentz factor `(1 - beta^2)^(-1/2)`.
pub fn lorentz_gamma(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(1.0 / ((1.0 - beta) * (1.0 + beta)).sqrt())
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() || beta.abs() >= 1.0 - VELOCITY_GUARD {
        return Err(Error::VelocityOutOfRange {
            beta,
            guard: VELOCITY_GUARD,
        });
    }
    Ok(())
}

/// Signed detector velocity (in units of c) with its cached Lorentz factor.
///
/// Positive `beta` is motion along +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorMotion {
    beta: f64,
    gamma: f64,
}

impl DetectorMotion {
    pub fn new(beta: f64) -> Result<Self> {
        let gamma = lorentz_gamma(beta)?;
        Ok(Self { beta, gamma })
    }

    pub fn at_rest() -> Self {
        Self {
            beta: 0.0,
            gamma: 1.0,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Laboratory event `(t, x)` reached at proper time `tau`, for a
    /// worldline crossing the origin at `tau = 0`.
    pub fn worldline(&self, tau: f64) -> (f64, f64) {
        (self.gamma * tau, self.gamma * self.beta * tau)
    }
}

/// One of the two counterpropagating laboratory modes, shared frequency and
/// field normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabMode {
    omega: f64,
    field_scale: f64,
}

impl LabMode {
    pub fn new(omega: f64) -> Result<Self> {
        Self::with_field_scale(omega, 1.0)
    }

    pub fn with_field_scale(omega: f64, field_scale: f64) -> Result<Self> {
        if !omega.is_finite() || omega <= 0.0 {
            return Err(Error::NonPositiveFrequency(omega));
        }
        if !field_scale.is_finite() || field_scale < 0.0 {
            return Err(Error::NegativeFieldScale(field_scale));
        }
        Ok(Self { omega, field_scale })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn field_scale(&self) -> f64 {
        self.field_scale
    }
}

/// Which propagation alternative: `Plus` travels along +x, `Minus` along -x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

/// Detector-frame frequencies `(Omega_plus, Omega_minus) = (gamma(1-beta)omega, gamma(1+beta)omega)`.
pub fn doppler_frequencies(motion: &DetectorMotion, mode: &LabMode) -> (f64, f64) {
    let scale = motion.gamma * mode.omega;
    (scale * (1.0 - motion.beta), scale * (1.0 + motion.beta))
}

/// Signed beat frequency `Omega_minus - Omega_plus = 2 gamma beta omega`.
pub fn doppler_splitting(motion: &DetectorMotion, mode: &LabMode) -> f64 {
    2.0 * motion.gamma * motion.beta * mode.omega
}

impl DetectorMotion {
    pub fn branch_frequency(&self, mode: &LabMode, branch: Branch) -> f64 {
        let (plus, minus) = doppler_frequencies(self, mode);
        match branch {
            Branch::Plus => plus,
            Branch::Minus => minus,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gamma_examples() {
        assert_eq!(lorentz_gamma(0.0).unwrap(), 1.0);
        assert_relative_eq!(lorentz_gamma(0.6).unwrap(), 1.25, max_relative = 1e-15);
        assert!(matches!(
            lorentz_gamma(1.0 - VELOCITY_GUARD),
            Err(Error::VelocityOutOfRange { .. })
        ));
        assert!(lorentz_gamma(-0.999_999_999_5).is_err());
        // 1 - 1e-8 is inside the guard; gamma ~ 7071
        assert!(lorentz_gamma(0.999_999_99).unwrap() > 7e3);
        assert!(lorentz_gamma(-1.0).is_err());
        assert!(lorentz_gamma(f64::NAN).is_err());
    }

    #[test]
    fn worldline_examples() {
        let rest = DetectorMotion::new(0.0).unwrap();
        assert_eq!(rest.worldline(5.0), (5.0, 0.0));

        let (t, x) = DetectorMotion::new(0.6).unwrap().worldline(4.0);
        assert_relative_eq!(t, 5.0, max_relative = 1e-15);
        assert_relative_eq!(x, 3.0, max_relative = 1e-15);

        let (t, x) = DetectorMotion::new(-0.6).unwrap().worldline(4.0);
        assert_relative_eq!(t, 5.0, max_relative = 1e-15);
        assert_relative_eq!(x, -3.0, max_relative = 1e-15);
    }

    #[test]
    fn doppler_examples() {
        let mode = LabMode::new(1.0).unwrap();
        let (p, m) = doppler_frequencies(&DetectorMotion::at_rest(), &mode);
        assert_eq!((p, m), (1.0, 1.0));

        let (p, m) = doppler_frequencies(&DetectorMotion::new(0.6).unwrap(), &mode);
        assert_relative_eq!(p, 0.5, max_relative = 1e-15);
        assert_relative_eq!(m, 2.0, max_relative = 1e-15);

        let (p, m) = doppler_frequencies(&DetectorMotion::new(-0.6).unwrap(), &mode);
        assert_relative_eq!(p, 2.0, max_relative = 1e-15);
        assert_relative_eq!(m, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn splitting_examples() {
        let mode = LabMode::new(1.0).unwrap();
        assert_eq!(doppler_splitting(&DetectorMotion::at_rest(), &mode), 0.0);
        assert_relative_eq!(
            doppler_splitting(&DetectorMotion::new(0.6).unwrap(), &mode),
            1.5,
            max_relative = 1e-15
        );
        // 2 * gamma * beta with gamma = (1 - 0.000625)^(-1/2), mpmath reference.
        assert_relative_eq!(
            doppler_splitting(&DetectorMotion::new(0.025).unwrap(), &mode),
            0.050_015_632_328_035_53,
            max_relative = 1e-14
        );
    }

    #[test]
    fn mode_validation() {
        assert!(LabMode::new(0.0).is_err());
        assert!(LabMode::new(-1.0).is_err());
        assert!(LabMode::with_field_scale(1.0, -0.1).is_err());
        assert!(LabMode::with_field_scale(1.0, 0.0).is_ok());
    }

    proptest! {
        #[test]
        fn gamma_matches_definition(beta in -0.999_f64..0.999) {
            let m = DetectorMotion::new(beta).unwrap();
            prop_assert!(m.gamma() >= 1.0);
            let direct = (1.0 - beta * beta).powf(-0.5);
            prop_assert!((m.gamma() - direct).abs() <= 1e-14 * direct);
        }

        #[test]
        fn splitting_is_branch_difference(beta in -0.999_f64..0.999, omega in 1e-3_f64..1e3) {
            let m = DetectorMotion::new(beta).unwrap();
            let mode = LabMode::new(omega).unwrap();
            let (p, q) = doppler_frequencies(&m, &mode);
            let split = doppler_splitting(&m, &mode);
            prop_assert!(p > 0.0 && q > 0.0);
            prop_assert!((split - (q - p)).abs() <= 1e-14 * (q + p));
            prop_assert!((p * q - omega * omega).abs() <= 1e-12 * omega * omega);
        }

        #[test]
        fn velocity_reversal_swaps_branches(beta in -0.999_f64..0.999, omega in 1e-3_f64..1e3) {
            let mode = LabMode::new(omega).unwrap();
            let (p, q) = doppler_frequencies(&DetectorMotion::new(beta).unwrap(), &mode);
            let (rp, rq) = doppler_frequencies(&DetectorMotion::new(-beta).unwrap(), &mode);
            prop_assert!((p - rq).abs() <= 1e-14 * p.max(rq));
            prop_assert!((q - rp).abs() <= 1e-14 * q.max(rp));
        }

        #[test]
        fn proper_time_invariance(beta in -0.999_f64..0.999, tau in -1e3_f64..1e3) {
            let (t, x) = DetectorMotion::new(beta).unwrap().worldline(tau);
            let interval = (t - x) * (t + x);
            prop_assert!((interval - tau * tau).abs() <= 1e-12 * (tau * tau).max(1e-300) + 1e-300);
        }
    }
}
