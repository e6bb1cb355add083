//! Forward model from implanted ions to what the confocal setup records:
//! emitter fields, photoluminescence maps and photon-correlation histograms.

pub mod field;
pub mod hbt;
pub mod map;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use field::{generate_emitter_field, Emitter, EmitterField, EmitterOrigin, FieldOptions};
pub use hbt::{simulate_hbt, CoincidenceHistogram, HbtConfig, Photophysics, Shelving};
pub use map::{expected_counts, synthesize_confocal_map, ConfocalMap, Region};

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("pixel size {pixel_nm} nm must be below the PSF FWHM {fwhm_nm} nm")]
    Undersampled { pixel_nm: f64, fwhm_nm: f64 },
    #[error("map format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// FWHM/σ of a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsConfig {
    #[serde(default = "default_wavelength")]
    pub emission_wavelength_nm: f64,
    #[serde(default = "default_na")]
    pub numerical_aperture: f64,
    /// Overrides 0.51·λ/NA when set.
    #[serde(default)]
    pub psf_fwhm_nm: Option<f64>,
    #[serde(default = "default_pixel")]
    pub pixel_size_nm: f64,
    #[serde(default = "default_dwell")]
    pub dwell_ms: f64,
    #[serde(default)]
    pub background_cps: f64,
    #[serde(default = "default_efficiency")]
    pub detection_efficiency: f64,
}

fn default_wavelength() -> f64 {
    738.0
}
fn default_na() -> f64 {
    0.95
}
fn default_pixel() -> f64 {
    100.0
}
fn default_dwell() -> f64 {
    10.0
}
fn default_efficiency() -> f64 {
    0.0012
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            emission_wavelength_nm: default_wavelength(),
            numerical_aperture: default_na(),
            psf_fwhm_nm: None,
            pixel_size_nm: default_pixel(),
            dwell_ms: default_dwell(),
            background_cps: 0.0,
            detection_efficiency: default_efficiency(),
        }
    }
}

impl OpticsConfig {
    pub fn psf_fwhm_nm(&self) -> f64 {
        self.psf_fwhm_nm.unwrap_or(0.51 * self.emission_wavelength_nm / self.numerical_aperture)
    }

    pub fn psf_sigma_um(&self) -> f64 {
        self.psf_fwhm_nm() * 1e-3 / FWHM_PER_SIGMA
    }

    /// Area under the peak-normalized PSF, µm².
    pub fn psf_area_um2(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.psf_sigma_um().powi(2)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        let positive = [self.emission_wavelength_nm, self.numerical_aperture, self.pixel_size_nm, self.dwell_ms];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.background_cps >= 0.0) || self.psf_fwhm_nm() <= 0.0 {
            return Err(OpticsError::Config(format!("invalid optics configuration {self:?}")));
        }
        if self.pixel_size_nm >= self.psf_fwhm_nm() {
            return Err(OpticsError::Undersampled { pixel_nm: self.pixel_size_nm, fwhm_nm: self.psf_fwhm_nm() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diffraction_limited_psf() {
        let c = OpticsConfig::default();
        assert!((c.psf_fwhm_nm() - 396.2).abs() < 0.1);
        assert!(c.validate().is_ok());
        let coarse = OpticsConfig { pixel_size_nm: 400.0, ..c };
        assert!(matches!(coarse.validate(), Err(OpticsError::Undersampled { .. })));
    }
}
