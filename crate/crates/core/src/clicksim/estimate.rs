use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{CountRecord, EstimateWithError};
use crate::error::{Error, Result};
use crate::gating::{gate_average_closed, sinc, GateWindow};
use crate::povm::PhotonState;

/// Estimators refuse records shorter than this.
pub const MIN_EVENTS: usize = 100;

pub const DEFAULT_PHASE_BINS: usize = 16;

fn require_events(record: &CountRecord) -> Result<()> {
    if record.len() < MIN_EVENTS {
        return Err(Error::TooFewEvents {
            got: record.len(),
            min: MIN_EVENTS,
        });
    }
    Ok(())
}

/// Event-time periodogram with the constant-rate part removed,
/// `|sum_j e^{i Omega tau_j} - N <e^{i Omega tau}>_[0,T]|^2`.
///
/// Subtracting the uniform-rate expectation removes the leakage of the
/// zero-frequency peak, which would otherwise pull the beat estimate.
pub fn periodogram(event_times: &[f64], t_total: f64, freq: f64) -> f64 {
    let n = event_times.len() as f64;
    let sum: Complex64 = event_times
        .iter()
        .map(|&t| Complex64::from_polar(1.0, freq * t))
        .sum();
    let window = GateWindow::rectangular(t_total).expect("record length is positive");
    let mean = gate_average_closed(-freq, &window) * n;
    (sum - mean).norm_sqr()
}

/// Frequencies per work unit in [`periodogram_on_grid`]. Fixed so results
/// do not depend on the number of threads.
const GRID_CHUNK: usize = 32;

/// [`periodogram`] at every grid frequency. Uniform grids advance the
/// phasor `e^{i f tau}` by a fixed rotation per step instead of calling
/// `sin_cos` for each frequency.
pub(crate) fn periodogram_on_grid(times: &[f64], t_total: f64, grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let step = if n > 1 {
        (grid[n - 1] - grid[0]) / (n - 1) as f64
    } else {
        0.0
    };
    let uniform = n > 2
        && grid
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs());
    if !uniform {
        return grid.par_iter().map(|&f| periodogram(times, t_total, f)).collect();
    }
    let count = times.len() as f64;
    let window = GateWindow::rectangular(t_total).expect("record length is positive");
    grid.par_chunks(GRID_CHUNK)
        .flat_map_iter(|chunk| {
            let mut sums = vec![Complex64::new(0.0, 0.0); chunk.len()];
            for &t in times {
                let mut z = Complex64::from_polar(1.0, chunk[0] * t);
                let rot = Complex64::from_polar(1.0, step * t);
                for s in sums.iter_mut() {
                    *s += z;
                    z *= rot;
                }
            }
            chunk
                .iter()
                .zip(sums)
                .map(|(&f, s)| (s - gate_average_closed(-f, &window) * count).norm_sqr())
                .collect::<Vec<_>>()
        })
        .collect()
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Beat frequency from the periodogram peak on `freq_grid`, refined by
/// golden-section search between the neighbouring grid points.
///
/// The standard error comes from the peak curvature: for weak modulation
/// the profile log-likelihood is `P(Omega)/N`, so
/// `std_error = sqrt(N / -P''(Omega_hat))`. The grid must be fine compared
/// with the peak width `2 pi / t_total`. Beats are reported as positive
/// frequencies.
pub fn estimate_beat(record: &CountRecord, freq_grid: &[f64]) -> Result<EstimateWithError> {
    require_events(record)?;
    if freq_grid.len() < 3 {
        return Err(Error::InvalidAxis(
            "frequency grid needs at least 3 points".into(),
        ));
    }
    if freq_grid.iter().any(|f| !f.is_finite() || *f <= 0.0) || freq_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidAxis(
            "frequency grid must be positive and strictly increasing".into(),
        ));
    }
    let times = record.event_times();
    let t_total = record.t_total();
    let power = periodogram_on_grid(times, t_total, freq_grid);
    let (k, _) = power.iter().enumerate().fold(
        (0, f64::MIN),
        |best, (i, &p)| if p > best.1 { (i, p) } else { best },
    );
    if k == 0 || k + 1 == freq_grid.len() {
        return Err(Error::BeatOutOfGrid { freq: freq_grid[k] });
    }
    let p = |f: f64| periodogram(times, t_total, f);
    let peak = golden_section_max(p, freq_grid[k - 1], freq_grid[k + 1]);
    let h = 1e-2 * 2.0 * PI / t_total;
    let curvature = (p(peak + h) - 2.0 * p(peak) + p(peak - h)) / (h * h);
    let n = record.len() as f64;
    let std_error = if curvature < 0.0 {
        (n / -curvature).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(EstimateWithError {
        value: peak,
        std_error,
        n_events: record.len(),
    })
}

/// Phase-binned visibility with the default 16 bins.
pub fn estimate_visibility(record: &CountRecord, delta_omega: f64) -> Result<EstimateWithError> {
    estimate_visibility_binned(record, delta_omega, DEFAULT_PHASE_BINS)
}

/// Fraction of `[0, T]` whose beat phase `delta_omega * tau mod 2 pi` falls
/// in each of `bins` equal phase bins.
fn phase_exposure(delta_omega: f64, t_total: f64, bins: usize) -> Vec<f64> {
    let width = 2.0 * PI / bins as f64;
    let total = delta_omega * t_total;
    let cycles = (total / (2.0 * PI)).floor();
    let rem = total - cycles * 2.0 * PI;
    (0..bins)
        .map(|k| {
            let partial = (rem - k as f64 * width).clamp(0.0, width);
            (cycles * width + partial) / total
        })
        .collect()
}

/// Fits `n_k = e_k (a + b cos x_k + c sin x_k)` by Poisson-weighted least
/// squares (iteratively reweighted on the fitted means). Returns the
/// coefficients and their covariance.
fn fit_cosine(x: &[f64], counts: &[f64], exposure: &[f64]) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let rows: Vec<Vector3<f64>> = x
        .iter()
        .zip(exposure)
        .map(|(&x, &e)| Vector3::new(e, e * x.cos(), e * x.sin()))
        .collect();
    let mut weights: Vec<f64> = counts.iter().map(|&n| 1.0 / n.max(1.0)).collect();
    let mut coef = Vector3::zeros();
    let mut cov = Matrix3::zeros();
    for _ in 0..4 {
        let mut normal = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for ((row, &n), &w) in rows.iter().zip(counts).zip(&weights) {
            normal += row * row.transpose() * w;
            rhs += row * (n * w);
        }
        cov = normal.try_inverse().ok_or(Error::SingularFit)?;
        coef = cov * rhs;
        weights = rows.iter().map(|row| 1.0 / row.dot(&coef).max(1.0)).collect();
    }
    Ok((coef, cov))
}

/// `sqrt(b^2 + c^2) / a` scaled by `1/attenuation`, with delta-method error.
fn contrast(coef: &Vector3<f64>, cov: &Matrix3<f64>, attenuation: f64) -> (f64, f64) {
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    let amp = b.hypot(c);
    let v = amp / (a * attenuation);
    let grad = if amp > 0.0 {
        Vector3::new(-v / a, b / (amp * a * attenuation), c / (amp * a * attenuation))
    } else {
        Vector3::new(0.0, 1.0 / (a * attenuation), 0.0)
    };
    let var = (grad.transpose() * cov * grad)[(0, 0)];
    (v, var.max(0.0).sqrt())
}

/// Visibility from counts binned by beat phase `(delta_omega tau) mod 2 pi`.
///
/// Counts are fitted to `A (1 + V cos(theta - theta0))` with each bin's
/// exposure taken into account, then corrected for the `sinc(pi/bins)`
/// contrast loss of finite bins. Because binning conditions on the beat
/// phase, this targets the ungated visibility.
pub fn estimate_visibility_binned(
    record: &CountRecord,
    delta_omega: f64,
    bins: usize,
) -> Result<EstimateWithError> {
    if !delta_omega.is_finite() || delta_omega <= 0.0 {
        return Err(Error::NonPositiveBeat(delta_omega));
    }
    require_events(record)?;
    if bins < 4 {
        return Err(Error::InvalidParameter(format!(
            "need at least 4 phase bins, got {bins}"
        )));
    }
    let width = 2.0 * PI / bins as f64;
    let mut counts = vec![0.0; bins];
    for &t in record.event_times() {
        let theta = (delta_omega * t).rem_euclid(2.0 * PI);
        let k = ((theta / width) as usize).min(bins - 1);
        counts[k] += 1.0;
    }
    let centers: Vec<f64> = (0..bins).map(|k| (k as f64 + 0.5) * width).collect();
    let exposure = phase_exposure(delta_omega, record.t_total(), bins);
    let (coef, cov) = fit_cosine(&centers, &counts, &exposure)?;
    let (value, std_error) = contrast(&coef, &cov, sinc(0.5 * width));
    Ok(EstimateWithError {
        value,
        std_error,
        n_events: record.len(),
    })
}

pub(crate) fn fit_fringe(phis: &[f64], counts: &[f64]) -> Result<(f64, f64)> {
    let ones = vec![1.0; phis.len()];
    let (coef, cov) = fit_cosine(phis, counts, &ones)?;
    Ok(contrast(&coef, &cov, 1.0))
}

fn is_pure(state: &PhotonState, plus: bool) -> bool {
    let (keep, drop) = if plus {
        (state.alpha_plus(), state.alpha_minus())
    } else {
        (state.alpha_minus(), state.alpha_plus())
    };
    drop.norm() == 0.0 && keep.norm() > 0.0
}

/// Directional bias `(N_plus - N_minus)/(N_plus + N_minus)` from records of
/// the pure states `|+>` and `|->`, with binomial standard error. The two
/// records must share every generation parameter except state and seed.
pub fn estimate_bias(record_plus: &CountRecord, record_minus: &CountRecord) -> Result<EstimateWithError> {
    let (p, m) = (record_plus.params(), record_minus.params());
    if let Some(diff) = p.setup_mismatch(m) {
        return Err(Error::MismatchedParams(diff));
    }
    if !is_pure(&p.state, true) {
        return Err(Error::MismatchedParams(
            "first record is not the |+> state".into(),
        ));
    }
    if !is_pure(&m.state, false) {
        return Err(Error::MismatchedParams(
            "second record is not the |-> state".into(),
        ));
    }
    let (np, nm) = (record_plus.len() as f64, record_minus.len() as f64);
    let n = np + nm;
    if n == 0.0 {
        return Err(Error::TooFewEvents { got: 0, min: 1 });
    }
    let value = (np - nm) / n;
    Ok(EstimateWithError {
        value,
        std_error: ((1.0 - value * value) / n).sqrt(),
        n_events: n as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clicksim::simulate_clicks;
    use crate::kinematics::{DetectorMotion, LabMode};
    use crate::response::SusceptibilitySpec;

    fn broadband_record(beta: f64, state: PhotonState, lambda0: f64, t_total: f64, seed: u64) -> CountRecord {
        simulate_clicks(
            &DetectorMotion::new(beta).unwrap(),
            &LabMode::new(1.0).unwrap(),
            &SusceptibilitySpec::broadband(Complex64::new(1.0, 0.0)),
            &state,
            lambda0,
            t_total,
            seed,
        )
        .unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn exposure_sums_to_one() {
        for (dw, t) in [(1.0, 2.0 * PI * 3.0), (0.7, 13.1), (5.0, 0.2)] {
            let e = phase_exposure(dw, t, 16);
            assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let e = phase_exposure(1.0, 2.0 * PI * 5.0, 8);
        assert!(e.iter().all(|x| (x - 0.125).abs() < 1e-12));
    }

    #[test]
    fn grid_periodogram_matches_direct() {
        let r = broadband_record(0.6, PhotonState::equal_superposition(0.2), 5.0, 100.0, 4);
        let g = grid(0.5, 2.5, 301);
        let fast = periodogram_on_grid(r.event_times(), r.t_total(), &g);
        for (f, p) in g.iter().zip(fast) {
            let direct = periodogram(r.event_times(), r.t_total(), *f);
            assert!(
                (p - direct).abs() <= 1e-9 * direct.max(1.0),
                "f={f}: {p} vs {direct}"
            );
        }
        let uneven = [1.0, 1.1, 1.3, 1.35];
        let slow = periodogram_on_grid(r.event_times(), r.t_total(), &uneven);
        assert_eq!(slow[2], periodogram(r.event_times(), r.t_total(), 1.3));
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let x = golden_section_max(|x| -(x - 0.3).powi(2), 0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-7);
    }

    #[test]
    fn beat_round_trip() {
        let r = broadband_record(0.6, PhotonState::equal_superposition(0.0), 50.0, 200.0, 1);
        let est = estimate_beat(&r, &grid(1.0, 2.0, 400)).unwrap();
        assert!(est.z_score(1.5) < 3.0, "{est:?}");

        let r = broadband_record(0.6, PhotonState::equal_superposition(PI / 2.0), 50.0, 200.0, 1);
        let est_shifted = estimate_beat(&r, &grid(1.0, 2.0, 400)).unwrap();
        assert!(est_shifted.z_score(1.5) < 3.0, "{est_shifted:?}");
    }

    #[test]
    fn beat_errors() {
        let r = broadband_record(0.6, PhotonState::equal_superposition(0.0), 0.1, 100.0, 1);
        assert!(r.len() < MIN_EVENTS);
        assert!(matches!(
            estimate_beat(&r, &grid(1.0, 2.0, 10)),
            Err(Error::TooFewEvents { .. })
        ));
        let r = broadband_record(0.6, PhotonState::equal_superposition(0.0), 20.0, 100.0, 1);
        assert!(matches!(
            estimate_beat(&r, &grid(1.52, 3.0, 100)),
            Err(Error::BeatOutOfGrid { .. })
        ));
        assert!(estimate_beat(&r, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn visibility_round_trip() {
        let dw = 2.0 / 3f64.sqrt();
        let t_total = 400.0 * 2.0 * PI / dw;
        let r = broadband_record(0.5, PhotonState::equal_superposition(0.0), 100.0, t_total, 7);
        let est = estimate_visibility(&r, dw).unwrap();
        assert!(est.z_score(0.6) < 3.0, "{est:?}");
    }

    #[test]
    fn visibility_guards() {
        let r = broadband_record(0.0, PhotonState::equal_superposition(0.0), 10.0, 100.0, 2);
        assert!(matches!(
            estimate_visibility(&r, 0.0),
            Err(Error::NonPositiveBeat(_))
        ));
    }

    #[test]
    fn bias_round_trip() {
        let p = broadband_record(0.5, PhotonState::plus(), 20.0, 2000.0, 5);
        let m = broadband_record(0.5, PhotonState::minus(), 20.0, 2000.0, 6);
        let est = estimate_bias(&p, &m).unwrap();
        assert!(est.z_score(-0.8) < 3.0, "{est:?}");

        let p = broadband_record(0.0, PhotonState::plus(), 20.0, 500.0, 5);
        let m = broadband_record(0.0, PhotonState::minus(), 20.0, 500.0, 6);
        assert!(estimate_bias(&p, &m).unwrap().z_score(0.0) < 3.0);
    }

    #[test]
    fn bias_rejects_mismatched_records() {
        let p = broadband_record(0.5, PhotonState::plus(), 20.0, 100.0, 5);
        let m = broadband_record(0.4, PhotonState::minus(), 20.0, 100.0, 6);
        assert!(matches!(estimate_bias(&p, &m), Err(Error::MismatchedParams(_))));
        let m = broadband_record(0.5, PhotonState::minus(), 20.0, 101.0, 6);
        assert!(matches!(estimate_bias(&p, &m), Err(Error::MismatchedParams(_))));
        let m = broadband_record(0.5, PhotonState::equal_superposition(0.0), 20.0, 100.0, 6);
        assert!(matches!(estimate_bias(&p, &m), Err(Error::MismatchedParams(_))));
        assert!(matches!(estimate_bias(&m, &p), Err(Error::MismatchedParams(_))));
    }
}
