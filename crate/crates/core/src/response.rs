//! Rest-frame detector susceptibility.

use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{Branch, DetectorMotion, LabMode};

/// Single-pole response `chi0 / (kappa/2 - i(Omega - omega0))`.
///
/// `kappa` is the full width at half maximum of `|chi|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lorentzian {
    chi0: Complex64,
    omega0: f64,
    kappa: f64,
}

impl Lorentzian {
    pub fn new(chi0: Complex64, omega0: f64, kappa: f64) -> Result<Self> {
        if !omega0.is_finite() || omega0 <= 0.0 {
            return Err(Error::NonPositiveFrequency(omega0));
        }
        check_width(kappa)?;
        Ok(Self { chi0, omega0, kappa })
    }

    pub fn chi0(&self) -> Complex64 {
        self.chi0
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn evaluate(&self, omega: f64) -> Complex64 {
        self.chi0 / Complex64::new(0.5 * self.kappa, -(omega - self.omega0))
    }
}

/// Sampled response curve, linearly interpolated in real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    grid: Vec<f64>,
    values: Vec<Complex64>,
}

/// One CSV row of a tabulated response: `omega,chi_re,chi_im`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct TableRow {
    omega: f64,
    chi_re: f64,
    chi_im: f64,
}

impl Table {
    pub fn new(grid: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidTable(format!(
                "{} frequencies but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < 2 {
            return Err(Error::InvalidTable("need at least 2 points".into()));
        }
        if grid.iter().any(|w| !w.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTable("non-finite entry".into()));
        }
        if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTable(format!(
                "frequencies not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { grid, values })
    }

    /// Reads a table with header `omega,chi_re,chi_im`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["omega", "chi_re", "chi_im"] {
            return Err(Error::InvalidTable(format!(
                "expected header omega,chi_re,chi_im, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for row in rdr.deserialize::<TableRow>() {
            let row = row?;
            grid.push(row.omega);
            values.push(Complex64::new(row.chi_re, row.chi_im));
        }
        Self::new(grid, values)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn evaluate(&self, omega: f64) -> Result<Complex64> {
        let lo = self.grid[0];
        let hi = self.grid[self.grid.len() - 1];
        if !(lo..=hi).contains(&omega) {
            return Err(Error::FrequencyOutOfTable { omega, lo, hi });
        }
        // index of the first node strictly greater than omega
        let upper = self.grid.partition_point(|&w| w <= omega);
        if upper == 0 {
            return Ok(self.values[0]);
        }
        let i = upper - 1;
        if self.grid[i] == omega || i + 1 == self.grid.len() {
            return Ok(self.values[i]);
        }
        let (w0, w1) = (self.grid[i], self.grid[i + 1]);
        let s = (omega - w0) / (w1 - w0);
        let (a, b) = (self.values[i], self.values[i + 1]);
        Ok(Complex64::new(a.re + s * (b.re - a.re), a.im + s * (b.im - a.im)))
    }
}

/// Rest-frame detector response.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SusceptibilitySpec {
    Broadband { chi0: Complex64 },
    Lorentzian(Lorentzian),
    Tabulated(Table),
}

impl SusceptibilitySpec {
    pub fn broadband(chi0: Complex64) -> Self {
        SusceptibilitySpec::Broadband { chi0 }
    }

    pub fn lorentzian(chi0: Complex64, omega0: f64, kappa: f64) -> Result<Self> {
        Lorentzian::new(chi0, omega0, kappa).map(SusceptibilitySpec::Lorentzian)
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        Table::new(grid, values).map(SusceptibilitySpec::Tabulated)
    }

    /// Complex susceptibility at detector-frame frequency `omega`.
    pub fn evaluate(&self, omega: f64) -> Result<Complex64> {
        if !omega.is_finite() || omega <= 0.0 {
            return Err(Error::NonPositiveFrequency(omega));
        }
        match self {
            SusceptibilitySpec::Broadband { chi0 } => Ok(*chi0),
            SusceptibilitySpec::Lorentzian(l) => Ok(l.evaluate(omega)),
            SusceptibilitySpec::Tabulated(t) => t.evaluate(omega),
        }
    }

    /// Same response with `chi0` (or every table sample) multiplied by `c`.
    pub fn rescaled(&self, c: Complex64) -> Self {
        match self {
            SusceptibilitySpec::Broadband { chi0 } => SusceptibilitySpec::Broadband { chi0: chi0 * c },
            SusceptibilitySpec::Lorentzian(l) => SusceptibilitySpec::Lorentzian(Lorentzian {
                chi0: l.chi0 * c,
                ..*l
            }),
            SusceptibilitySpec::Tabulated(t) => SusceptibilitySpec::Tabulated(Table {
                grid: t.grid.clone(),
                values: t.values.iter().map(|v| v * c).collect(),
            }),
        }
    }
}

fn check_width(kappa: f64) -> Result<()> {
    if !kappa.is_finite() || kappa <= 0.0 {
        return Err(Error::NonPositiveWidth(kappa));
    }
    Ok(())
}

/// Quality factor `omega / kappa`, referenced to the laboratory frequency.
pub fn q_factor(mode: &LabMode, kappa: f64) -> Result<f64> {
    check_width(kappa)?;
    Ok(mode.omega() / kappa)
}

/// Lorentzian whose resonance sits on the chosen Doppler branch at this
/// velocity. The tuning is fixed once built.
pub fn branch_tuned_lorentzian(
    motion: &DetectorMotion,
    mode: &LabMode,
    chi0: Complex64,
    kappa: f64,
    branch: Branch,
) -> Result<SusceptibilitySpec> {
    SusceptibilitySpec::lorentzian(chi0, motion.branch_frequency(mode, branch), kappa)
}
