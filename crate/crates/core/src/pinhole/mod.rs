//! Beam transport through a conical pinhole and tallies on the sample plane.

pub mod geometry;
pub mod simulate;
pub mod tally;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stopping::material::IonConfig;
use crate::stopping::{IonSpecies, StoppingError};

pub use geometry::{path_length_in_wall, PinholeConfig, PinholeGeometry, PinholeWall};
pub use simulate::{simulate_pinhole, simulate_pinhole_multi};
pub use tally::{
    radial_density_profile, scattered_to_direct_ratio, write_profile_csv, Counters, DirectHistogram, Impact, ImpactKind,
    ProfileBin, SamplePlaneTally,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PinholeError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Stopping(#[from] StoppingError),
    #[error("scattered/direct ratio undefined: no direct ions in tally")]
    UndefinedRatio,
}

/// Supported beam energy window, MeV.
pub const SUPPORTED_ENERGY_MEV: (f64, f64) = (0.4, 3.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamSpec {
    pub ion: IonSpecies,
    pub energy_mev: f64,
    /// Half width at half maximum of the Gaussian angular spread, per axis.
    pub divergence_mrad: f64,
    /// Radius of the uniformly illuminated disk; `None` illuminates the
    /// whole sampling disk around the aperture.
    pub beam_radius_um: Option<f64>,
    pub fluence_cm2: f64,
}

impl BeamSpec {
    pub fn silicon(energy_mev: f64) -> Self {
        Self { ion: IonSpecies::silicon(), energy_mev, divergence_mrad: 0.3, beam_radius_um: None, fluence_cm2: 0.0 }
    }

    pub fn energy_ev(&self) -> f64 {
        self.energy_mev * 1e6
    }

    /// Hard errors for impossible beams, warnings for energies outside the
    /// supported window.
    pub fn validate(&self) -> Result<Vec<String>, PinholeError> {
        if !(self.energy_mev > 0.0 && self.energy_mev.is_finite()) {
            return Err(PinholeError::Config(format!("beam energy must be > 0 MeV, got {}", self.energy_mev)));
        }
        if !(self.divergence_mrad >= 0.0) || !(self.fluence_cm2 >= 0.0) {
            return Err(PinholeError::Config("divergence and fluence must be >= 0".into()));
        }
        if let Some(r) = self.beam_radius_um {
            if !(r > 0.0) {
                return Err(PinholeError::Config("beam radius must be > 0".into()));
            }
        }
        let (lo, hi) = SUPPORTED_ENERGY_MEV;
        let mut warnings = Vec::new();
        if self.energy_mev < lo || self.energy_mev > hi {
            warnings.push(format!("beam energy {} MeV outside supported {lo}-{hi} MeV", self.energy_mev));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    pub energy_mev: f64,
    #[serde(default = "default_divergence")]
    pub divergence_mrad: f64,
    #[serde(default)]
    pub beam_radius_um: Option<f64>,
    #[serde(default)]
    pub fluence_cm2: f64,
    #[serde(default)]
    pub ion: Option<IonConfig>,
}

fn default_divergence() -> f64 {
    0.3
}

impl BeamConfig {
    pub fn build(&self) -> Result<BeamSpec, PinholeError> {
        let ion = match &self.ion {
            Some(c) => c.build()?,
            None => IonSpecies::silicon(),
        };
        let beam = BeamSpec {
            ion,
            energy_mev: self.energy_mev,
            divergence_mrad: self.divergence_mrad,
            beam_radius_um: self.beam_radius_um,
            fluence_cm2: self.fluence_cm2,
        };
        beam.validate()?;
        Ok(beam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beam_validation() {
        assert!(BeamSpec::silicon(2.9).validate().unwrap().is_empty());
        assert_eq!(BeamSpec::silicon(5.0).validate().unwrap().len(), 1);
        assert!(BeamSpec::silicon(-1.0).validate().is_err());
        let b = BeamSpec { divergence_mrad: -0.1, ..BeamSpec::silicon(1.0) };
        assert!(b.validate().is_err());
    }

    #[test]
    fn beam_config_defaults_to_silicon() {
        let c: BeamConfig = toml::from_str("energy_mev = 0.4").unwrap();
        let b = c.build().unwrap();
        assert_eq!(b.ion, IonSpecies::silicon());
        assert_eq!(b.divergence_mrad, 0.3);
    }
}
