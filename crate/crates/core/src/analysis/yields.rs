//! Activation yield per (energy, fluence) from measured spot rates.

use std::io::Write;

use serde::Serialize;

use crate::stats::{activation_yield, CalibrationConstants, YieldEntry, YieldModel};

use super::spots::SpotRecord;
use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpotMeasurement {
    pub energy_mev: f64,
    pub fluence_cm2: f64,
    pub peak_rate_cps: f64,
    pub area_ratio: f64,
}

impl SpotMeasurement {
    pub fn from_spot(energy_mev: f64, fluence_cm2: f64, spot: &SpotRecord) -> Self {
        Self { energy_mev, fluence_cm2, peak_rate_cps: spot.peak_rate_cps, area_ratio: spot.area_ratio }
    }

    /// A planned spot with no detected emission.
    pub fn undetected(energy_mev: f64, fluence_cm2: f64) -> Self {
        Self { energy_mev, fluence_cm2, peak_rate_cps: 0.0, area_ratio: 1.0 }
    }

    pub fn emitters(&self, calib: &CalibrationConstants) -> f64 {
        self.peak_rate_cps * self.area_ratio / calib.single_rate_cps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YieldSettings {
    pub calibration: CalibrationConstants,
    pub spot_area_cm2: f64,
    pub throughput_correction: f64,
    pub throughput_relative_sigma: f64,
}

impl Default for YieldSettings {
    fn default() -> Self {
        Self {
            calibration: CalibrationConstants::default(),
            spot_area_cm2: crate::stats::nominal_spot_area_cm2(),
            throughput_correction: 1.0,
            throughput_relative_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YieldRow {
    pub energy_mev: f64,
    pub fluence_cm2: f64,
    pub n_spots: usize,
    pub mean_emitters: f64,
    pub emitters_sigma: f64,
    pub activation_yield: f64,
    pub yield_sigma: f64,
    /// 95% upper limit when no emission was detected in the group.
    pub yield_upper_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YieldCurve {
    pub rows: Vec<YieldRow>,
}

impl YieldCurve {
    pub fn to_yield_model(&self) -> YieldModel {
        YieldModel {
            entries: self
                .rows
                .iter()
                .map(|r| YieldEntry { energy_mev: r.energy_mev, fluence_cm2: r.fluence_cm2, activation_yield: r.activation_yield })
                .collect(),
            provenance: "extracted from measured spot rates".into(),
            ..YieldModel::default()
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "energy_mev,fluence_cm2,n_spots,mean_emitters,emitters_sigma,yield,yield_sigma,yield_upper_bound")?;
        for r in &self.rows {
            let upper = r.yield_upper_bound.map(|u| format!("{u:.3e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:e},{},{:.4},{:.4},{:.6e},{:.3e},{upper}",
                r.energy_mev, r.fluence_cm2, r.n_spots, r.mean_emitters, r.emitters_sigma, r.activation_yield, r.yield_sigma
            )?;
        }
        Ok(())
    }
}

/// 95% Poisson upper limit on the total emitter number when none is seen.
const ZERO_COUNT_UPPER_95: f64 = 2.995_732_273_553_991;

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Groups spots by (energy, fluence) and converts mean emitter numbers to
/// yields. Rows are ordered by energy then fluence, and each group sum is
/// taken over sorted values, so the result does not depend on input order.
pub fn extract_yield_curve(spots: &[SpotMeasurement], settings: &YieldSettings) -> Result<YieldCurve, AnalysisError> {
    settings.calibration.validate()?;
    if !(settings.throughput_relative_sigma >= 0.0) {
        return Err(AnalysisError::InvalidInput("throughput sigma must be >= 0".into()));
    }
    if spots.iter().any(|s| !(s.peak_rate_cps >= 0.0 && s.area_ratio >= 1.0 && s.fluence_cm2 > 0.0 && s.energy_mev > 0.0)) {
        return Err(AnalysisError::InvalidInput("spot rates must be >= 0, area ratios >= 1, fluence and energy > 0".into()));
    }
    let mut sorted = spots.to_vec();
    sorted.sort_by(|a, b| a.energy_mev.total_cmp(&b.energy_mev).then(a.fluence_cm2.total_cmp(&b.fluence_cm2)));
    let calib = &settings.calibration;
    let mut rows = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let (e, f) = (sorted[i].energy_mev, sorted[i].fluence_cm2);
        let j = i + sorted[i..].iter().take_while(|s| same(s.energy_mev, e) && same(s.fluence_cm2, f)).count();
        let mut n: Vec<f64> = sorted[i..j].iter().map(|s| s.emitters(calib)).collect();
        n.sort_by(f64::total_cmp);
        let k = n.len() as f64;
        let mean = n.iter().sum::<f64>() / k;
        let sem = if n.len() > 1 {
            (n.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
        } else {
            mean.sqrt()
        };
        let y = activation_yield(mean, f, settings.spot_area_cm2, settings.throughput_correction)?;
        let rel = if mean > 0.0 {
            ((sem / mean).powi(2) + calib.relative_rate_uncertainty().powi(2) + settings.throughput_relative_sigma.powi(2)).sqrt()
        } else {
            0.0
        };
        rows.push(YieldRow {
            energy_mev: e,
            fluence_cm2: f,
            n_spots: n.len(),
            mean_emitters: mean,
            emitters_sigma: sem,
            activation_yield: y,
            yield_sigma: y * rel,
            yield_upper_bound: (mean == 0.0).then(|| {
                ZERO_COUNT_UPPER_95 / (k * f * settings.spot_area_cm2 * settings.throughput_correction)
            }),
        });
        i = j;
    }
    Ok(YieldCurve { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(e: f64, f: f64, rate: f64) -> SpotMeasurement {
        SpotMeasurement { energy_mev: e, fluence_cm2: f, peak_rate_cps: rate, area_ratio: 2.0 }
    }

    #[test]
    fn grouped_and_order_independent() {
        let mut data = vec![m(2.9, 1e13, 2700.0), m(0.4, 1e12, 1350.0), m(2.9, 1e13, 5400.0), m(0.4, 1e12, 1350.0)];
        let a = extract_yield_curve(&data, &YieldSettings::default()).unwrap();
        data.reverse();
        let b = extract_yield_curve(&data, &YieldSettings::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.rows[0].energy_mev, 0.4);
        assert!((a.rows[1].mean_emitters - 3.0).abs() < 1e-12);
        let area = crate::stats::nominal_spot_area_cm2();
        assert!((a.rows[1].activation_yield - 3.0 / (1e13 * area)).abs() < 1e-15);
    }

    #[test]
    fn dark_group_reports_upper_bound() {
        let data = [SpotMeasurement::undetected(0.4, 1e12), SpotMeasurement::undetected(0.4, 1e12)];
        let c = extract_yield_curve(&data, &YieldSettings::default()).unwrap();
        let r = c.rows[0];
        assert_eq!(r.activation_yield, 0.0);
        let expect = 2.9957 / (2.0 * 1e12 * crate::stats::nominal_spot_area_cm2());
        assert!((r.yield_upper_bound.unwrap() / expect - 1.0).abs() < 1e-4);
    }

    #[test]
    fn impossible_yield_rejected() {
        let data = [m(2.9, 1e8, 1e9)];
        assert!(matches!(extract_yield_curve(&data, &YieldSettings::default()), Err(AnalysisError::Stats(_))));
    }
}
