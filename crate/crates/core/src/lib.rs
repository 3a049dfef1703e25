//! Photodetection by a detector in uniform motion through two
//! counterpropagating single-photon modes.
//!
//! The crate builds the velocity-dependent single-click effect
//! ([`povm`]), its finite-time gated version ([`gating`]), and synthetic
//! click records with estimators that recover the beat frequency,
//! visibility and bias from them ([`clicksim`]).

pub mod clicksim;
pub mod error;
pub mod gating;
pub mod io;
pub mod kinematics;
pub mod povm;
pub mod response;
pub mod selfcheck;

pub use error::{Error, Result};
pub use gating::{GateWindow, VisibilityMapGrid};
pub use kinematics::{Branch, DetectorMotion, LabMode};
pub use povm::{DetectionAmplitudes, PhotonState, QubitAnalyzer};
pub use response::SusceptibilitySpec;

/// `photodet/<version>`, recorded in output metadata.
pub fn software_version() -> String {
    format!("photodet/{}", env!("CARGO_PKG_VERSION"))
}
