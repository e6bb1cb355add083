//! Spot lattices, fluence ladders and expected emitter numbers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{spot_area_cm2, StatsError, YieldModel};

/// Fluence window the beamline is characterized for, cm⁻².
pub const SUPPORTED_FLUENCE_CM2: (f64, f64) = (1e8, 1e14);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub label: String,
    pub energy_mev: f64,
    /// One value per row, per column, per spot (row-major) or a single value.
    pub fluences_cm2: Vec<f64>,
    pub separation_um: f64,
    pub rows: usize,
    pub columns: usize,
    /// Alignment marker spots this far to the right of the lattice.
    #[serde(default)]
    pub marker_offset_um: Option<f64>,
    #[serde(default = "default_marker_fluence")]
    pub marker_fluence_cm2: f64,
    #[serde(default = "default_spot_diameter")]
    pub spot_diameter_um: f64,
    #[serde(default = "one")]
    pub throughput_correction: f64,
}

fn default_marker_fluence() -> f64 {
    1e14
}
fn default_spot_diameter() -> f64 {
    1.0
}
fn one() -> f64 {
    1.0
}

/// `n` fluences starting at `start`, each half the previous.
pub fn halving_ladder(start_cm2: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start_cm2 / (1u64 << i) as f64).collect()
}

impl SessionSpec {
    fn base(label: &str, energy_mev: f64, fluences_cm2: Vec<f64>, separation_um: f64, rows: usize, columns: usize) -> Self {
        Self {
            label: label.into(),
            energy_mev,
            fluences_cm2,
            separation_um,
            rows,
            columns,
            marker_offset_um: None,
            marker_fluence_cm2: default_marker_fluence(),
            spot_diameter_um: default_spot_diameter(),
            throughput_correction: 1.0,
        }
    }

    /// Row fluences of the wide-range sessions: every decade from 1e14 to
    /// 1e8 plus intermediate rows around the single-emitter transition.
    pub fn wide_range_ladder() -> Vec<f64> {
        vec![1e14, 1e13, 1e12, 1e11, 3e10, 1e10, 3e9, 1e9, 3e8, 1e8]
    }

    /// Built-in sessions `A`..`D`.
    pub fn preset(label: &str) -> Option<Self> {
        match label.to_ascii_uppercase().as_str() {
            "A" => Some(Self::base("A", 2.9, Self::wide_range_ladder(), 5.0, 10, 5)),
            "B" => Some(Self::base("B", 0.4, Self::wide_range_ladder(), 5.0, 10, 5)),
            "C" => Some(Self::base("C", 1.0, halving_ladder(1.28e11, 8), 10.0, 3, 8)),
            "D" => Some(Self {
                marker_offset_um: Some(400.0),
                ..Self::base("D", 0.4, vec![1.6e10], 10.0, 1, 5)
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if self.rows == 0 || self.columns == 0 {
            return Err(StatsError::Config("rows and columns must be >= 1".into()));
        }
        if !(self.separation_um > 0.0) || !(self.energy_mev > 0.0) || !(self.spot_diameter_um > 0.0) {
            return Err(StatsError::Config("separation, energy and spot diameter must be > 0".into()));
        }
        if !(self.throughput_correction > 0.0) {
            return Err(StatsError::Config("throughput correction must be > 0".into()));
        }
        if self.fluences_cm2.is_empty() || self.fluences_cm2.iter().any(|f| !(*f > 0.0)) {
            return Err(StatsError::Config("fluences must be > 0".into()));
        }
        let n = self.fluences_cm2.len();
        if ![1, self.rows, self.columns, self.rows * self.columns].contains(&n) {
            return Err(StatsError::Config(format!(
                "{n} fluences do not match {} rows x {} columns",
                self.rows, self.columns
            )));
        }
        Ok(())
    }

    /// Fluence of spot (row, column).
    pub fn fluence_at(&self, row: usize, column: usize) -> f64 {
        let f = &self.fluences_cm2;
        match f.len() {
            1 => f[0],
            n if n == self.rows * self.columns => f[row * self.columns + column],
            n if n == self.rows => f[row],
            _ => f[column],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedSpot {
    pub x_um: f64,
    pub y_um: f64,
    pub fluence_cm2: f64,
    pub expected_ions: f64,
    pub expected_emitters: f64,
    pub marker: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplantPlan {
    pub label: String,
    pub energy_mev: f64,
    pub separation_um: f64,
    pub rows: usize,
    pub columns: usize,
    pub spot_diameter_um: f64,
    pub spots: Vec<PlannedSpot>,
    pub warnings: Vec<String>,
}

impl ImplantPlan {
    /// Lattice spots, without alignment markers.
    pub fn lattice(&self) -> impl Iterator<Item = &PlannedSpot> {
        self.spots.iter().filter(|s| !s.marker)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x_um,y_um,fluence_cm2,expected_ions,expected_emitters")?;
        for s in &self.spots {
            writeln!(
                out,
                "{},{},{:e},{:.6e},{:.6e}",
                s.x_um, s.y_um, s.fluence_cm2, s.expected_ions, s.expected_emitters
            )?;
        }
        Ok(())
    }
}

/// Lays out the session lattice (column along +x, row along +y, first spot
/// at the origin) and attaches expected ion and emitter numbers.
pub fn plan_session(spec: &SessionSpec, yields: &YieldModel) -> Result<ImplantPlan, StatsError> {
    spec.validate()?;
    yields.validate()?;
    let area = spot_area_cm2(spec.spot_diameter_um) * spec.throughput_correction;
    let spot = |x_um: f64, y_um: f64, fluence_cm2: f64, marker: bool| {
        let expected_ions = fluence_cm2 * area;
        PlannedSpot {
            x_um,
            y_um,
            fluence_cm2,
            expected_ions,
            expected_emitters: yields.yield_at(spec.energy_mev, fluence_cm2) * expected_ions,
            marker,
        }
    };
    let mut spots = Vec::with_capacity(spec.rows * spec.columns + spec.rows);
    for r in 0..spec.rows {
        for c in 0..spec.columns {
            let (x, y) = (c as f64 * spec.separation_um, r as f64 * spec.separation_um);
            spots.push(spot(x, y, spec.fluence_at(r, c), false));
        }
    }
    if let Some(offset) = spec.marker_offset_um {
        let x = (spec.columns - 1) as f64 * spec.separation_um + offset;
        for r in 0..spec.rows {
            spots.push(spot(x, r as f64 * spec.separation_um, spec.marker_fluence_cm2, true));
        }
    }
    let (lo, hi) = SUPPORTED_FLUENCE_CM2;
    let mut warnings: Vec<String> = spots
        .iter()
        .map(|s| s.fluence_cm2)
        .filter(|f| *f < lo || *f > hi)
        .map(|f| format!("fluence {f:e} cm^-2 outside supported {lo:e}-{hi:e}"))
        .collect();
    warnings.dedup();
    Ok(ImplantPlan {
        label: spec.label.clone(),
        energy_mev: spec.energy_mev,
        separation_um: spec.separation_um,
        rows: spec.rows,
        columns: spec.columns,
        spot_diameter_um: spec.spot_diameter_um,
        spots,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::single_emitter_fraction;

    #[test]
    fn session_a_lattice() {
        let plan = plan_session(&SessionSpec::preset("A").unwrap(), &YieldModel::default()).unwrap();
        assert_eq!(plan.spots.len(), 50);
        assert!(plan.warnings.is_empty());
        let xs: Vec<f64> = plan.spots.iter().map(|s| s.x_um).collect();
        assert_eq!(xs[..5], [0.0, 5.0, 10.0, 15.0, 20.0]);
        assert_eq!(plan.spots[49].y_um, 45.0);
        assert_eq!(plan.spots[0].fluence_cm2, 1e14);
        assert_eq!(plan.spots[49].fluence_cm2, 1e8);
    }

    #[test]
    fn session_c_ladder_is_exact() {
        let c = SessionSpec::preset("c").unwrap();
        assert_eq!(c.fluences_cm2, vec![1.28e11, 6.4e10, 3.2e10, 1.6e10, 0.8e10, 0.4e10, 0.2e10, 0.1e10]);
        let plan = plan_session(&c, &YieldModel::default()).unwrap();
        assert_eq!(plan.spots.len(), 24);
        assert_eq!(plan.spots[9].fluence_cm2, 6.4e10);
    }

    #[test]
    fn session_d_markers_and_single_emitter_fraction() {
        let plan = plan_session(&SessionSpec::preset("D").unwrap(), &YieldModel::default()).unwrap();
        assert_eq!(plan.lattice().count(), 5);
        let marker = plan.spots.iter().find(|s| s.marker).unwrap();
        assert_eq!(marker.x_um, 440.0);
        let lambda = plan.spots[0].expected_emitters;
        assert!((lambda - 2.67).abs() < 0.05, "{lambda}");
        assert!((single_emitter_fraction(lambda).unwrap() - 0.185).abs() < 0.01);
        let two_pct = YieldModel::constant(0.021).unwrap();
        let lambda = plan_session(&SessionSpec::preset("D").unwrap(), &two_pct).unwrap().spots[0].expected_emitters;
        assert!((lambda - 2.6).abs() < 0.05);
        assert!((single_emitter_fraction(lambda).unwrap() - 0.19).abs() < 0.01);
    }

    #[test]
    fn single_spot_at_origin_and_warnings() {
        let s = SessionSpec::base("x", 1.0, vec![1e15], 5.0, 1, 1);
        let plan = plan_session(&s, &YieldModel::default()).unwrap();
        assert_eq!((plan.spots[0].x_um, plan.spots[0].y_um), (0.0, 0.0));
        assert_eq!(plan.warnings.len(), 1);
        let bad = SessionSpec::base("x", 1.0, vec![1e10, 1e11, 1e12], 5.0, 2, 2);
        assert!(plan_session(&bad, &YieldModel::default()).is_err());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let plan = plan_session(&SessionSpec::preset("D").unwrap(), &YieldModel::default()).unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
        let json = serde_json::to_string(&plan).unwrap();
        assert_eq!(serde_json::from_str::<ImplantPlan>(&json).unwrap(), plan);
    }
}
