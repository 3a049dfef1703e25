//! Flag definitions, JSON config merging and validation.
//!
//! Every flag is optional at the clap level so that a config file can supply
//! it; defaults are applied after merging and are listed in `--help`.

use std::path::{Path, PathBuf};

use clap::Args;
use num_complex::Complex64;
use photodet::gating::Axis;
use photodet::response::{branch_tuned_lorentzian, Table};
use photodet::{Branch, DetectorMotion, GateWindow, LabMode, SusceptibilitySpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::commands::CliError;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Signed detector velocity v/c, |beta| < 1 - 1e-9 [required]
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,

    /// Laboratory angular frequency of both modes (c = 1) [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,

    /// Rest-frame response: broadband, lorentzian or table:PATH (CSV with
    /// header omega,chi_re,chi_im) [default: broadband]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<String>,

    /// Real part of chi0 [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi0_re: Option<f64>,

    /// Imaginary part of chi0 [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi0_im: Option<f64>,

    /// Lorentzian resonance; only used with --tune none
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,

    /// Lorentzian FWHM of |chi|^2 [required for lorentzian]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,

    /// Lorentzian resonance placement: plus (on Omega_+), minus (on
    /// Omega_-) or none (use --omega0) [default: plus]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tune: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PovmArgs {
    /// JSON file with the same keys as the flags (snake_case)
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,

    /// Relative photon phase of (|+> + e^{i phi}|->)/sqrt(2) [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,

    /// Rectangular gate length in proper time; adds V_obs to the report
    #[arg(long = "gate-T")]
    #[serde(skip_serializing_if = "Option::is_none", rename = "gate_T")]
    pub gate_t: Option<f64>,

    /// Write the report as JSON to this path
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct MapArgs {
    /// JSON file with the same keys as the flags (snake_case)
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Quality factor Q = omega/kappa [default: 10]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,

    /// Laboratory angular frequency [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,

    /// beta Q axis as MIN:MAX:N [default: 0:2:64]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_bq: Option<String>,

    /// beta omega T axis as MIN:MAX:N [default: 0:6:64]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_bwt: Option<String>,

    /// Output CSV; metadata goes to the same path with .json [default: map.csv]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ClicksArgs {
    /// JSON file with the same keys as the flags (snake_case)
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,

    /// Relative photon phase of the simulated state [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,

    /// Events per unit proper time per unit click rate [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,

    /// Record length in proper time [default: 1000]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_total: Option<f64>,

    /// 64-bit RNG seed [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Gate length for the windowed phi-sweep estimate of V_obs; the sweep
    /// is skipped without it
    #[arg(long = "gate-T")]
    #[serde(skip_serializing_if = "Option::is_none", rename = "gate_T")]
    pub gate_t: Option<f64>,

    /// Gate trials per phi value in the sweep [default: 200]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gates: Option<usize>,

    /// Periodogram grid MIN:MAX:N for the beat estimate [default:
    /// 0.5|dOmega|:1.5|dOmega|:N with spacing about pi/(4 t_total)]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_freq: Option<String>,

    /// Record CSV; sidecars and the report are written next to it
    /// [default: clicks.csv]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub trait HasConfig {
    fn config_path(&self) -> Option<&Path>;
}

impl HasConfig for PovmArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
}

impl HasConfig for MapArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
}

impl HasConfig for ClicksArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
}

/// Overlays the flags that were given on top of the config file, if any.
pub fn merge_with_file<T>(flags: T) -> Result<T, CliError>
where
    T: HasConfig + Serialize + DeserializeOwned,
{
    let Some(path) = flags.config_path().map(Path::to_path_buf) else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("reading config {}: {e}", path.display())))?;
    let mut base: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
    let Some(base_map) = base.as_object_mut() else {
        return Err(CliError::Validation(format!(
            "config {} must be a JSON object",
            path.display()
        )));
    };
    let overlay = serde_json::to_value(&flags).expect("flag structs serialize");
    if let serde_json::Value::Object(map) = overlay {
        base_map.extend(map);
    }
    let keys: Vec<String> = base_map.keys().cloned().collect();
    let merged: T = serde_json::from_value(base)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
    // anything that did not survive the round trip is not a known key
    let known = serde_json::to_value(&merged).expect("flag structs serialize");
    if let Some(unknown) = keys.iter().find(|k| known.get(k.as_str()).is_none()) {
        return Err(CliError::Validation(format!(
            "config {}: unknown or null key {unknown:?}",
            path.display()
        )));
    }
    Ok(merged)
}

/// Fully validated physical setup.
#[derive(Debug, Clone)]
pub struct Model {
    pub motion: DetectorMotion,
    pub mode: LabMode,
    pub spec: SusceptibilitySpec,
    /// Lorentzian `(omega0, kappa)` when applicable.
    pub lorentzian: Option<(f64, f64)>,
    pub tuning: Option<Branch>,
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Validation(format!(
            "--{name} must be finite and > 0, got {v}"
        )))
    }
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<Model, CliError> {
        let beta = self
            .beta
            .ok_or_else(|| CliError::Validation("--beta is required".into()))?;
        let motion = DetectorMotion::new(beta)?;
        let mode = LabMode::new(self.omega.unwrap_or(1.0))?;
        let chi0 = Complex64::new(self.chi0_re.unwrap_or(1.0), self.chi0_im.unwrap_or(0.0));
        if !chi0.is_finite() {
            return Err(CliError::Validation("chi0 must be finite".into()));
        }
        let chi = self.chi.as_deref().unwrap_or("broadband");
        let lorentz_only = |flag: &str, set: bool| {
            if set && chi != "lorentzian" {
                Err(CliError::Validation(format!(
                    "--{flag} only applies to --chi lorentzian"
                )))
            } else {
                Ok(())
            }
        };
        lorentz_only("kappa", self.kappa.is_some())?;
        lorentz_only("omega0", self.omega0.is_some())?;
        lorentz_only("tune", self.tune.is_some())?;

        let (spec, lorentzian, tuning) = match chi {
            "broadband" => (SusceptibilitySpec::broadband(chi0), None, None),
            "lorentzian" => {
                let kappa = positive(
                    "kappa",
                    self.kappa
                        .ok_or_else(|| CliError::Validation("--kappa is required for lorentzian".into()))?,
                )?;
                let tuning = match self.tune.as_deref().unwrap_or("plus") {
                    "plus" => Some(Branch::Plus),
                    "minus" => Some(Branch::Minus),
                    "none" => None,
                    other => {
                        return Err(CliError::Validation(format!(
                            "--tune must be plus, minus or none, got {other:?}"
                        )))
                    }
                };
                let spec = match tuning {
                    Some(branch) => {
                        if self.omega0.is_some() {
                            return Err(CliError::Validation(
                                "--omega0 conflicts with --tune plus/minus; use --tune none".into(),
                            ));
                        }
                        branch_tuned_lorentzian(&motion, &mode, chi0, kappa, branch)?
                    }
                    None => {
                        let omega0 = self.omega0.ok_or_else(|| {
                            CliError::Validation("--omega0 is required with --tune none".into())
                        })?;
                        SusceptibilitySpec::lorentzian(chi0, positive("omega0", omega0)?, kappa)?
                    }
                };
                let omega0 = match &spec {
                    SusceptibilitySpec::Lorentzian(l) => l.omega0(),
                    _ => unreachable!("lorentzian branch builds a lorentzian"),
                };
                (spec, Some((omega0, kappa)), tuning)
            }
            other => match other.strip_prefix("table:") {
                Some(path) => {
                    if self.chi0_re.is_some() || self.chi0_im.is_some() {
                        return Err(CliError::Validation(
                            "--chi0-re/--chi0-im do not apply to tabulated responses".into(),
                        ));
                    }
                    let table = Table::from_csv_path(path).map_err(|e| match e {
                        photodet::Error::Io(io) => CliError::Io(format!("reading table {path}: {io}")),
                        other => CliError::Validation(format!("table {path}: {other}")),
                    })?;
                    (SusceptibilitySpec::Tabulated(table), None, None)
                }
                None => {
                    return Err(CliError::Validation(format!(
                        "--chi must be broadband, lorentzian or table:PATH, got {other:?}"
                    )))
                }
            },
        };
        Ok(Model {
            motion,
            mode,
            spec,
            lorentzian,
            tuning,
        })
    }
}

pub fn phi(v: Option<f64>) -> Result<f64, CliError> {
    let phi = v.unwrap_or(0.0);
    if phi.is_finite() {
        Ok(phi)
    } else {
        Err(CliError::Validation("--phi must be finite".into()))
    }
}

pub fn gate(v: Option<f64>) -> Result<Option<GateWindow>, CliError> {
    v.map(|t| GateWindow::rectangular(t).map_err(CliError::from))
        .transpose()
}

pub fn axis(flag: &str, v: Option<&str>, default: &str) -> Result<Axis, CliError> {
    Axis::parse(v.unwrap_or(default)).map_err(|e| CliError::Validation(format!("--{flag}: {e}")))
}

pub fn positive_or(name: &str, v: Option<f64>, default: f64) -> Result<f64, CliError> {
    positive(name, v.unwrap_or(default))
}
