//! Realized emitter positions from a plan and the pinhole tally.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::pinhole::{ImpactKind, SamplePlaneTally};
use crate::rng::substream;
use crate::stats::{ImplantPlan, YieldModel};
use crate::stopping::{csda_range, IonSpecies, TargetMaterial};

use super::map::Region;
use super::OpticsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmitterOrigin {
    Direct,
    Scattered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    pub x_um: f64,
    pub y_um: f64,
    pub depth_nm: f64,
    /// Detected rate at reference excitation, counts/s.
    pub brightness_cps: f64,
    pub origin: EmitterOrigin,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmitterField {
    pub emitters: Vec<Emitter>,
}

impl EmitterField {
    pub fn len(&self) -> usize {
        self.emitters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emitters.is_empty()
    }

    pub fn count(&self, origin: EmitterOrigin) -> usize {
        self.emitters.iter().filter(|e| e.origin == origin).count()
    }

    pub fn merged(mut self, other: EmitterField) -> Self {
        self.emitters.extend(other.emitters);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldOptions {
    pub single_rate_cps: f64,
    /// Relative standard deviation of the log-normal brightness spread.
    pub brightness_dispersion: f64,
    pub include_scattered: bool,
    /// Standard deviation of the stage placement error per spot and axis, µm.
    pub placement_jitter_um: f64,
    /// Scattered emitters are only kept inside this window (all kept when `None`).
    pub keep_region: Option<Region>,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { single_rate_cps: 2700.0, brightness_dispersion: 0.2, include_scattered: true, placement_jitter_um: 0.0, keep_region: None }
    }
}

struct Brightness(Option<LogNormal<f64>>, f64);

impl Brightness {
    fn new(mean: f64, rel_sd: f64) -> Result<Self, OpticsError> {
        if !(mean >= 0.0) || !(rel_sd >= 0.0) {
            return Err(OpticsError::Config("brightness and dispersion must be >= 0".into()));
        }
        if rel_sd == 0.0 || mean == 0.0 {
            return Ok(Self(None, mean));
        }
        let s2 = (1.0 + rel_sd * rel_sd).ln();
        let d = LogNormal::new(mean.ln() - 0.5 * s2, s2.sqrt()).map_err(|e| OpticsError::Config(e.to_string()))?;
        Ok(Self(Some(d), mean))
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.0.as_ref().map_or(self.1, |d| d.sample(rng))
    }
}

fn poisson<R: Rng>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        0
    } else {
        Poisson::new(lambda).map(|d| d.sample(rng) as u64).unwrap_or(0)
    }
}

/// Draws the emitters of every planned spot and, when enabled, the emitters
/// created by ions scattered at the pinhole while that spot was implanted.
///
/// Spot emitter numbers are Poisson with mean yield × expected ions. Their
/// positions resample direct impacts of `tally` (the aperture image);
/// scattered emitters resample scattered impacts, randomly rotated about
/// the spot, at a rate of (scattered / direct) per implanted ion.
pub fn generate_emitter_field(
    plan: &ImplantPlan,
    yields: &YieldModel,
    tally: &SamplePlaneTally,
    options: &FieldOptions,
    seed: u64,
) -> Result<EmitterField, OpticsError> {
    let e_plan = plan.energy_mev * 1e6;
    if (tally.beam_energy_ev - e_plan).abs() > 1e-6 * e_plan.max(1.0) {
        return Err(OpticsError::Config(format!(
            "plan energy {} MeV does not match tally energy {} MeV",
            plan.energy_mev,
            tally.beam_energy_ev * 1e-6
        )));
    }
    yields.validate().map_err(|e| OpticsError::Config(e.to_string()))?;
    let brightness = Brightness::new(options.single_rate_cps, options.brightness_dispersion)?;
    let jitter = Normal::new(0.0, options.placement_jitter_um)
        .map_err(|_| OpticsError::Config("placement jitter must be >= 0".into()))?;
    let direct: Vec<(f64, f64)> = impacts_of(tally, ImpactKind::Direct);
    let scattered: Vec<(f64, f64)> = impacts_of(tally, ImpactKind::Scattered);
    if direct.is_empty() {
        return Err(OpticsError::Config("tally has no direct impacts to shape the spots".into()));
    }
    // aperture image relative to its own centroid
    let n = direct.len() as f64;
    let (cx, cy) = direct.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let scatter_per_ion = scattered.len() as f64 / direct.len() as f64;
    let depth = csda_range(&IonSpecies::silicon(), &TargetMaterial::diamond(), e_plan).unwrap_or(0.0);

    let mut emitters = Vec::new();
    for (k, spot) in plan.spots.iter().enumerate() {
        let mut rng = substream(seed, k as u64);
        let (sx, sy) = (spot.x_um + jitter.sample(&mut rng), spot.y_um + jitter.sample(&mut rng));
        let y = yields.yield_at(plan.energy_mev, spot.fluence_cm2);
        let n_direct = poisson(y * spot.expected_ions, &mut rng);
        for _ in 0..n_direct {
            let (x, yy) = direct[rng.gen_range(0..direct.len())];
            emitters.push(Emitter {
                x_um: sx + x - cx,
                y_um: sy + yy - cy,
                depth_nm: depth,
                brightness_cps: brightness.sample(&mut rng),
                origin: EmitterOrigin::Direct,
            });
        }
        if !options.include_scattered || scattered.is_empty() {
            continue;
        }
        let n_scat = poisson(y * spot.expected_ions * scatter_per_ion, &mut rng);
        for _ in 0..n_scat {
            let (x, yy) = scattered[rng.gen_range(0..scattered.len())];
            let (s, c) = (2.0 * std::f64::consts::PI * rng.gen::<f64>()).sin_cos();
            let (px, py) = (sx + c * x - s * yy, sy + s * x + c * yy);
            let b = brightness.sample(&mut rng);
            if options.keep_region.map_or(true, |r| r.contains(px, py)) {
                emitters.push(Emitter {
                    x_um: px,
                    y_um: py,
                    depth_nm: depth,
                    brightness_cps: b,
                    origin: EmitterOrigin::Scattered,
                });
            }
        }
    }
    Ok(EmitterField { emitters })
}

fn impacts_of(tally: &SamplePlaneTally, kind: ImpactKind) -> Vec<(f64, f64)> {
    tally.impacts.iter().filter(|i| i.kind == kind).map(|i| (i.x_um, i.y_um)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pinhole::{Impact, SamplePlaneTally};
    use crate::stats::{plan_session, SessionSpec};

    fn disk_tally(energy_ev: f64) -> SamplePlaneTally {
        let mut impacts = Vec::new();
        for i in 0..2000 {
            let r = 0.5 * ((i as f64 + 0.5) / 2000.0).sqrt();
            let a = i as f64 * 2.399_963;
            impacts.push(Impact { x_um: r * a.cos(), y_um: r * a.sin(), energy_ev, kind: ImpactKind::Direct });
        }
        for i in 0..200 {
            let r = 5.0 + i as f64 * 0.5;
            impacts.push(Impact { x_um: r, y_um: 0.0, energy_ev: 0.5 * energy_ev, kind: ImpactKind::Scattered });
        }
        SamplePlaneTally::from_impacts(1.0, energy_ev, impacts, 0, 0, 5.0)
    }

    #[test]
    fn zero_yield_gives_empty_field() {
        let plan = plan_session(&SessionSpec::preset("A").unwrap(), &YieldModel::default()).unwrap();
        let f = generate_emitter_field(&plan, &YieldModel::constant(0.0).unwrap(), &disk_tally(2.9e6), &FieldOptions::default(), 1)
            .unwrap();
        assert!(f.is_empty());
    }

    #[test]
    fn energy_mismatch_rejected() {
        let plan = plan_session(&SessionSpec::preset("D").unwrap(), &YieldModel::default()).unwrap();
        assert!(generate_emitter_field(&plan, &YieldModel::default(), &disk_tally(2.9e6), &FieldOptions::default(), 1).is_err());
    }

    #[test]
    fn spot_counts_are_poisson() {
        let plan = plan_session(&SessionSpec::preset("D").unwrap(), &YieldModel::default()).unwrap();
        let lattice: Vec<_> = plan.lattice().cloned().collect();
        let lambda = lattice[0].expected_emitters;
        let opts = FieldOptions { include_scattered: false, ..FieldOptions::default() };
        let counts: Vec<f64> = (0..400)
            .map(|seed| {
                let f = generate_emitter_field(&plan, &YieldModel::default(), &disk_tally(0.4e6), &opts, seed).unwrap();
                f.emitters.iter().filter(|e| e.x_um.abs() < 2.0 && e.y_um.abs() < 2.0).count() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
        let se = (lambda / counts.len() as f64).sqrt();
        assert!((mean - lambda).abs() < 4.0 * se, "{mean} vs {lambda}");
        assert!((var / lambda - 1.0).abs() < 0.25, "{var} vs {lambda}");
    }

    #[test]
    fn scattered_emitters_follow_the_tally() {
        let mut plan = plan_session(&SessionSpec::preset("A").unwrap(), &YieldModel::default()).unwrap();
        plan.spots.truncate(1);
        let f = generate_emitter_field(&plan, &YieldModel::default(), &disk_tally(2.9e6), &FieldOptions::default(), 5).unwrap();
        let scat: Vec<f64> =
            f.emitters.iter().filter(|e| e.origin == EmitterOrigin::Scattered).map(|e| e.x_um.hypot(e.y_um)).collect();
        assert!(!scat.is_empty());
        assert!(scat.iter().all(|r| *r >= 4.99 && *r <= 105.0));
        // uniform radii on the tally translate into surface density falling as 1/r
        let inner = scat.iter().filter(|r| **r < 55.0).count() as f64 / (55f64.powi(2) - 25.0);
        let outer = scat.iter().filter(|r| **r >= 55.0).count() as f64 / (105f64.powi(2) - 55f64.powi(2));
        assert!(inner > outer);
    }
}
