//! Tabulated activation yield versus energy and fluence.

use serde::{Deserialize, Serialize};

use super::{nominal_spot_area_cm2, StatsError};

/// Fluence below which the yield is assumed constant.
pub const CONSTANT_BELOW_FLUENCE_CM2: f64 = 1e12;

/// Planning yield: one emitter per 1 µm spot at 0.6e10 cm⁻².
pub fn default_planning_yield() -> f64 {
    1.0 / (0.6e10 * nominal_spot_area_cm2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YieldEntry {
    pub energy_mev: f64,
    pub fluence_cm2: f64,
    #[serde(rename = "yield")]
    pub activation_yield: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YieldModel {
    #[serde(default)]
    pub entries: Vec<YieldEntry>,
    /// Fluences below 1e12 cm⁻² return the 1e12 cm⁻² value.
    #[serde(default = "yes")]
    pub constant_below_1e12: bool,
    /// Used when the table is empty.
    #[serde(default = "default_planning_yield")]
    pub fallback_yield: f64,
    #[serde(default = "default_provenance")]
    pub provenance: String,
}

fn yes() -> bool {
    true
}

fn default_provenance() -> String {
    "planning default: one emitter per 1 um spot at 0.6e10 cm^-2".into()
}

impl Default for YieldModel {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            constant_below_1e12: true,
            fallback_yield: default_planning_yield(),
            provenance: default_provenance(),
        }
    }
}

impl YieldModel {
    pub fn constant(y: f64) -> Result<Self, StatsError> {
        let m = Self { fallback_yield: y, provenance: format!("constant {y}"), ..Self::default() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let in_unit = |y: f64| (0.0..=1.0).contains(&y);
        if !in_unit(self.fallback_yield) {
            return Err(StatsError::Config(format!("yield {} outside [0, 1]", self.fallback_yield)));
        }
        for e in &self.entries {
            if !in_unit(e.activation_yield) || !(e.fluence_cm2 > 0.0) || !(e.energy_mev > 0.0) {
                return Err(StatsError::Config(format!("invalid yield entry {e:?}")));
            }
        }
        Ok(())
    }

    /// Yield at (energy, fluence): entries at the nearest tabulated energy,
    /// linear in log-fluence between them, clamped at the ends.
    pub fn yield_at(&self, energy_mev: f64, fluence_cm2: f64) -> f64 {
        if self.entries.is_empty() {
            return self.fallback_yield;
        }
        let nearest = self
            .entries
            .iter()
            .map(|e| e.energy_mev)
            .min_by(|a, b| (a - energy_mev).abs().total_cmp(&(b - energy_mev).abs()))
            .unwrap();
        let mut row: Vec<_> = self.entries.iter().filter(|e| e.energy_mev == nearest).collect();
        row.sort_by(|a, b| a.fluence_cm2.total_cmp(&b.fluence_cm2));
        let f = if self.constant_below_1e12 { fluence_cm2.max(CONSTANT_BELOW_FLUENCE_CM2) } else { fluence_cm2 };
        let x = f.ln();
        if x <= row[0].fluence_cm2.ln() {
            return row[0].activation_yield;
        }
        for w in row.windows(2) {
            let (x0, x1) = (w[0].fluence_cm2.ln(), w[1].fluence_cm2.ln());
            if x <= x1 {
                let t = (x - x0) / (x1 - x0);
                return w[0].activation_yield + t * (w[1].activation_yield - w[0].activation_yield);
            }
        }
        row.last().unwrap().activation_yield
    }
}
