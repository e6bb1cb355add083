//! Run configuration: one TOML document shared by every subcommand, with
//! command-line flags layered on top.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sivplant::optics::{FieldOptions, HbtConfig, OpticsConfig};
use sivplant::pinhole::{BeamConfig, PinholeConfig};
use sivplant::stats::{CalibrationConstants, SessionSpec, YieldModel};

use crate::Failure;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Built-in session `A`..`D`; ignored when `session` is given.
    pub preset: Option<String>,
    pub session: Option<SessionSpec>,
    pub yields: Option<YieldModel>,
    pub transport: TransportSection,
    pub optics: OpticsConfig,
    pub field: FieldOptions,
    pub hbt: HbtSection,
    pub analysis: AnalysisSection,
    pub calibration: CalibrationConstants,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportSection {
    /// Falls back to the planned session energy when absent.
    pub beam: Option<BeamConfig>,
    pub pinhole: PinholeConfig,
    pub distances_mm: Vec<f64>,
    pub histories: u64,
    pub profile_bin_um: f64,
    pub sweep_wall_angles_deg: Vec<f64>,
    pub sweep_energies_mev: Vec<f64>,
}

impl Default for TransportSection {
    fn default() -> Self {
        Self {
            beam: None,
            pinhole: PinholeConfig::default(),
            distances_mm: vec![1.0],
            histories: 100_000,
            profile_bin_um: 5.0,
            sweep_wall_angles_deg: vec![10.0, 20.0, 40.0, 60.0, 90.0],
            sweep_energies_mev: vec![0.4, 3.0],
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HbtSection {
    /// Number of emitters behind the correlator; 0 skips the measurement.
    pub emitters: usize,
    pub settings: HbtConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub threshold_sigma: f64,
    /// Detections closer than this to a planned spot count as on-plan.
    pub plan_tolerance_um: f64,
    pub g2_bunching: bool,
    pub g2_plateau_min_delay_ns: Option<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { threshold_sigma: 5.0, plan_tolerance_um: 0.5, g2_bunching: false, g2_plateau_min_delay_ns: None }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn session_spec(&self) -> Result<SessionSpec, Failure> {
        if let Some(spec) = &self.session {
            return Ok(spec.clone());
        }
        let label = self
            .preset
            .as_deref()
            .ok_or_else(|| Failure::Usage("no session: pass --preset or give a [session] table".into()))?;
        SessionSpec::preset(label).ok_or_else(|| Failure::Usage(format!("unknown preset `{label}` (expected A, B, C or D)")))
    }

    pub fn yield_model(&self) -> YieldModel {
        self.yields.clone().unwrap_or_default()
    }

    pub fn require_seed(&self) -> Result<u64, Failure> {
        self.seed.ok_or_else(|| Failure::Usage("this subcommand is stochastic: pass --seed or set `seed`".into()))
    }

    /// SHA-256 of the effective configuration for `command`.
    pub fn digest(&self, command: &str) -> String {
        let json = serde_json::to_vec(&(command, self)).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Provenance stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: format!("sivplant {}", env!("CARGO_PKG_VERSION")),
            command: command.into(),
            config_sha256: config.digest(command),
            seed: config.seed,
        }
    }

    pub fn line(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!("{} {} config_sha256={} seed={seed}", self.tool, self.command, self.config_sha256)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_tables_fill_defaults() {
        let c: RunConfig = toml::from_str(
            "seed = 3\npreset = \"d\"\n[optics]\ndwell_ms = 5.0\n[hbt]\nemitters = 1\n[hbt.settings]\nacquisition_s = 2.0\n",
        )
        .unwrap();
        assert_eq!(c.optics.dwell_ms, 5.0);
        assert_eq!(c.hbt.settings.acquisition_s, 2.0);
        assert_eq!(c.hbt.settings.window_ns, HbtConfig::default().window_ns);
        assert_eq!(c.session_spec().unwrap().label, "D");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 1").is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig { seed: Some(1), ..RunConfig::default() };
        let b = RunConfig { seed: Some(2), ..RunConfig::default() };
        assert_eq!(a.digest("plan"), a.clone().digest("plan"));
        assert_ne!(a.digest("plan"), b.digest("plan"));
        assert_ne!(a.digest("plan"), a.digest("synth"));
    }
}
