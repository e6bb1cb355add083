//! Activation yield, emitter-number statistics and implantation planning.

pub mod plan;
pub mod poisson;
pub mod yields;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use plan::{halving_ladder, plan_session, ImplantPlan, PlannedSpot, SessionSpec};
pub use poisson::{poisson_spot_distribution, single_emitter_fraction};
pub use yields::{YieldEntry, YieldModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("inconsistent inputs: yield {0:.4} exceeds 1")]
    YieldAboveOne(f64),
    #[error("infeasible target: {0}")]
    Infeasible(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Nominal 1 µm pinhole area, cm².
pub fn nominal_spot_area_cm2() -> f64 {
    spot_area_cm2(1.0)
}

pub fn spot_area_cm2(diameter_um: f64) -> f64 {
    let r_cm = 0.5 * diameter_um * 1e-4;
    std::f64::consts::PI * r_cm * r_cm
}

/// Measurement constants of the confocal setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConstants {
    pub single_rate_cps: f64,
    pub single_rate_sigma_cps: f64,
    pub excitation_power_mw: f64,
    pub excitation_wavelength_nm: f64,
    pub numerical_aperture: f64,
    pub detection_efficiency: f64,
}

impl Default for CalibrationConstants {
    fn default() -> Self {
        Self {
            single_rate_cps: 2700.0,
            single_rate_sigma_cps: 300.0,
            excitation_power_mw: 3.3,
            excitation_wavelength_nm: 656.0,
            numerical_aperture: 0.95,
            detection_efficiency: 0.0012,
        }
    }
}

impl CalibrationConstants {
    pub fn validate(&self) -> Result<(), StatsError> {
        let all = [
            self.single_rate_cps,
            self.single_rate_sigma_cps,
            self.excitation_power_mw,
            self.excitation_wavelength_nm,
            self.numerical_aperture,
            self.detection_efficiency,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(StatsError::Config(format!("calibration constants must be positive: {self:?}")))
        }
    }

    pub fn relative_rate_uncertainty(&self) -> f64 {
        self.single_rate_sigma_cps / self.single_rate_cps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmitterEstimate {
    pub count: f64,
    /// Standard uncertainty propagated from the single-emitter rate.
    pub sigma: f64,
}

/// Number of emitters behind a measured peak rate. `area_ratio` scales the
/// focal-spot rate up to the whole implanted spot.
pub fn emitters_from_countrate(
    rate_cps: f64,
    area_ratio: f64,
    calib: &CalibrationConstants,
) -> Result<EmitterEstimate, StatsError> {
    if !(rate_cps >= 0.0) || !(area_ratio >= 1.0) {
        return Err(StatsError::Domain(format!("rate {rate_cps} must be >= 0 and area ratio {area_ratio} >= 1")));
    }
    let count = rate_cps * area_ratio / calib.single_rate_cps;
    Ok(EmitterEstimate { count, sigma: count * calib.relative_rate_uncertainty() })
}

/// Emitters per implanted ion.
pub fn activation_yield(
    emitters: f64,
    fluence_cm2: f64,
    spot_area_cm2: f64,
    throughput_correction: f64,
) -> Result<f64, StatsError> {
    if !(fluence_cm2 > 0.0 && spot_area_cm2 > 0.0 && throughput_correction > 0.0) || !(emitters >= 0.0) {
        return Err(StatsError::Domain("fluence, area and throughput must be > 0, emitters >= 0".into()));
    }
    let y = emitters / (fluence_cm2 * spot_area_cm2 * throughput_correction);
    // tolerate rounding at the boundary
    if y > 1.0 + 1e-12 {
        return Err(StatsError::YieldAboveOne(y));
    }
    Ok(y.min(1.0))
}

/// Fluence giving `mean_emitters` activated centers per spot on average.
pub fn fluence_for_mean(mean_emitters: f64, activation_yield: f64, spot_area_cm2: f64) -> Result<f64, StatsError> {
    if !(mean_emitters >= 0.0) || !(spot_area_cm2 > 0.0) {
        return Err(StatsError::Domain("mean must be >= 0 and spot area > 0".into()));
    }
    if !(activation_yield > 0.0) {
        return Err(StatsError::Infeasible(format!("activation yield {activation_yield} cannot produce emitters")));
    }
    Ok(mean_emitters / (activation_yield * spot_area_cm2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn countrate_examples() {
        let c = CalibrationConstants::default();
        let one = emitters_from_countrate(2700.0, 1.0, &c).unwrap();
        assert_relative_eq!(one.count, 1.0);
        assert_relative_eq!(one.sigma, 0.1111, epsilon = 1e-4);
        assert_eq!(emitters_from_countrate(0.0, 3.0, &c).unwrap().count, 0.0);
        assert_relative_eq!(emitters_from_countrate(5400.0, 2.0, &c).unwrap().count, 4.0);
        assert!(emitters_from_countrate(100.0, 0.5, &c).is_err());
    }

    #[test]
    fn yield_examples() {
        let a = nominal_spot_area_cm2();
        assert_relative_eq!(a, 7.853_981_6e-9, max_relative = 1e-7);
        assert_relative_eq!(activation_yield(1e10 * a, 1e10, a, 1.0).unwrap(), 1.0);
        assert_eq!(activation_yield(0.0, 1e10, a, 1.0).unwrap(), 0.0);
        assert!(matches!(activation_yield(2e10 * a, 1e10, a, 1.0), Err(StatsError::YieldAboveOne(_))));
        let ions = 0.6e10 * a;
        assert!((ions - 47.1).abs() < 0.1);
        assert!((activation_yield(1.0, 0.6e10, a, 1.0).unwrap() - 0.0212).abs() < 1e-4);
    }

    #[test]
    fn fluence_examples() {
        let a = nominal_spot_area_cm2();
        let f = fluence_for_mean(1.0, 0.021, a).unwrap();
        assert!((f / 0.6e10 - 1.0).abs() < 0.05, "{f}");
        assert_eq!(fluence_for_mean(0.0, 0.02, a).unwrap(), 0.0);
        assert_relative_eq!(fluence_for_mean(1.0, 0.042, a).unwrap(), 0.5 * f, max_relative = 1e-15);
        assert!(matches!(fluence_for_mean(1.0, 0.0, a), Err(StatsError::Infeasible(_))));
    }
}
