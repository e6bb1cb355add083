//! Binary-collision-approximation history of a single ion.
//!
//! Inside a material the ion alternates free flights of one mean atomic
//! spacing with a collision against one target atom. Electronic loss is
//! continuous along each flight; nuclear loss and deflection come from the
//! ZBL angle table. Vacuum segments are ray-traced to the next surface.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use super::geometry::{Geometry, Region, Vec3};
use super::material::IonSpecies;
use super::zbl::{self, AngleTable};
use super::{StoppingError, StoppingModel};

/// Step past a surface so the next region query lands on the far side.
const SURFACE_NUDGE_NM: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub position_nm: [f64; 3],
    pub energy_ev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Termination {
    StoppedInMaterial,
    Exited {
        position_nm: [f64; 3],
        direction: [f64; 3],
        energy_ev: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub points: Vec<TrajectoryPoint>,
    pub termination: Termination,
}

impl TrajectoryRecord {
    pub fn final_point(&self) -> &TrajectoryPoint {
        self.points.last().expect("record always holds the start point")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StartState {
    pub position_nm: Vec3,
    pub direction: Vec3,
    pub energy_ev: f64,
}

#[derive(Debug, Clone)]
struct Partner {
    cumulative_fraction: f64,
    screening_nm: f64,
    /// eps = eps_per_ev * E_lab
    eps_per_ev: f64,
    /// maximum fractional energy transfer 4 M1 M2 / (M1 + M2)²
    gamma: f64,
    mass_ratio: f64,
}

#[derive(Debug, Clone)]
struct MaterialKernel {
    electronic_slope: f64,
    spacing_nm: f64,
    max_impact_nm: f64,
    partners: Vec<Partner>,
}

/// Precomputed collision data for one ion in one geometry.
pub struct Transporter<'g, G: Geometry + ?Sized> {
    geometry: &'g G,
    model: StoppingModel,
    kernels: Vec<MaterialKernel>,
    table: &'static AngleTable,
}

impl<'g, G: Geometry + ?Sized> Transporter<'g, G> {
    pub fn new(ion: &IonSpecies, geometry: &'g G, model: StoppingModel) -> Result<Self, StoppingError> {
        model.validate()?;
        let kernels = geometry
            .materials()
            .iter()
            .map(|mat| {
                let spacing = mat.mean_spacing_nm();
                let mut acc = 0.0;
                let partners = mat
                    .components()
                    .iter()
                    .map(|c| {
                        acc += c.fraction;
                        let (m1, m2) = (ion.mass_u(), c.mass_u);
                        Partner {
                            cumulative_fraction: acc,
                            screening_nm: zbl::screening_length_nm(ion.atomic_number(), c.atomic_number),
                            eps_per_ev: zbl::reduced_energy(ion.atomic_number(), m1, c.atomic_number, m2, 1.0),
                            gamma: 4.0 * m1 * m2 / (m1 + m2).powi(2),
                            mass_ratio: m1 / m2,
                        }
                    })
                    .collect();
                MaterialKernel {
                    electronic_slope: model.electronic_slope(ion, mat),
                    spacing_nm: spacing,
                    max_impact_nm: model.max_impact_parameter_nm.unwrap_or(spacing / PI.sqrt()),
                    partners,
                }
            })
            .collect();
        Ok(Self { geometry, model, kernels, table: AngleTable::global() })
    }

    /// Follows one history. With `record_path` false only the start and end
    /// points are stored.
    pub fn run<R: Rng + ?Sized>(
        &self,
        start: &StartState,
        rng: &mut R,
        record_path: bool,
    ) -> Result<TrajectoryRecord, StoppingError> {
        let norm = start.direction.norm();
        if !(norm > 0.0) || !start.position_nm.iter().all(|v| v.is_finite()) {
            return Err(StoppingError::InvalidStart("direction must be non-zero, position finite".into()));
        }
        if !(start.energy_ev > self.model.cutoff_ev) {
            return Err(StoppingError::InvalidStart(format!(
                "energy {} eV not above cutoff {} eV",
                start.energy_ev, self.model.cutoff_ev
            )));
        }
        if self.geometry.region(&start.position_nm) == Region::Outside {
            return Err(StoppingError::InvalidStart("start point outside the geometry".into()));
        }

        let mut pos = start.position_nm;
        let mut dir = start.direction / norm;
        let mut energy = start.energy_ev;
        let mut points = vec![point(&pos, energy)];
        let push = |points: &mut Vec<TrajectoryPoint>, pos: &Vec3, e: f64| {
            if record_path {
                points.push(point(pos, e));
            }
        };
        let mut steps: u64 = 0;
        // Distance the ion can still travel without any boundary check:
        // geometry safety minus path flown since it was evaluated.
        let mut budget = 0.0;
        let mut current = 0;

        let termination = loop {
            let region = if budget > 0.0 { Region::Material(current) } else { self.geometry.region(&pos) };
            match region {
                Region::Outside => {
                    break Termination::Exited {
                        position_nm: pos.into(),
                        direction: dir.into(),
                        energy_ev: energy,
                    };
                }
                Region::Vacuum => {
                    let s = self.geometry.distance_to_boundary(&pos, &dir);
                    if !s.is_finite() {
                        break Termination::Exited {
                            position_nm: pos.into(),
                            direction: dir.into(),
                            energy_ev: energy,
                        };
                    }
                    pos += dir * (s + SURFACE_NUDGE_NM);
                    push(&mut points, &pos, energy);
                }
                Region::Material(m) => {
                    let k = &self.kernels[m];
                    current = m;
                    steps += 1;
                    if budget < k.spacing_nm || (self.model.range_rejection && steps % 8 == 0) {
                        budget = self.geometry.safety(&pos);
                        if self.model.range_rejection && budget > 2.0 * energy.sqrt() / k.electronic_slope {
                            break Termination::StoppedInMaterial;
                        }
                    }
                    let to_surface = if budget >= k.spacing_nm {
                        f64::INFINITY
                    } else {
                        self.geometry.distance_to_boundary(&pos, &dir)
                    };
                    let flight = k.spacing_nm.min(to_surface);
                    // dE/ds = -k sqrt(E) integrated exactly over the flight
                    let root = energy.sqrt() - 0.5 * k.electronic_slope * flight;
                    if root <= 0.0 {
                        pos += dir * (2.0 * energy.sqrt() / k.electronic_slope);
                        energy = 0.0;
                        push(&mut points, &pos, energy);
                        break Termination::StoppedInMaterial;
                    }
                    energy = root * root;
                    if to_surface < k.spacing_nm {
                        pos += dir * (to_surface + SURFACE_NUDGE_NM);
                        budget = 0.0;
                        push(&mut points, &pos, energy);
                        if energy < self.model.cutoff_ev
                            && matches!(self.geometry.region(&pos), Region::Material(_))
                        {
                            break Termination::StoppedInMaterial;
                        }
                        continue;
                    }
                    pos += dir * flight;
                    budget -= flight;
                    energy = self.collide(k, energy, &mut dir, rng);
                    push(&mut points, &pos, energy);
                    if energy < self.model.cutoff_ev {
                        break Termination::StoppedInMaterial;
                    }
                }
            }
        };
        if !record_path || points.len() == 1 {
            points.push(point(&pos, energy));
        }
        Ok(TrajectoryRecord { points, termination })
    }

    fn collide<R: Rng + ?Sized>(&self, k: &MaterialKernel, energy: f64, dir: &mut Vec3, rng: &mut R) -> f64 {
        let partner = match k.partners.as_slice() {
            [only] => only,
            all => {
                let pick: f64 = rng.gen();
                all.iter().find(|p| pick < p.cumulative_fraction).unwrap_or_else(|| all.last().unwrap())
            }
        };
        let impact = k.max_impact_nm * rng.gen::<f64>().sqrt();
        let eps = partner.eps_per_ev * energy;
        let theta = self.table.angle(eps, impact / partner.screening_nm);
        let (sin_t, cos_t) = theta.sin_cos();
        let transfer = partner.gamma * energy * 0.5 * (1.0 - cos_t);
        // lab angle: tan psi = sin theta / (cos theta + M1/M2)
        let den = cos_t + partner.mass_ratio;
        let norm = (sin_t * sin_t + den * den).sqrt();
        let (sin_psi, cos_psi) = if norm > 0.0 { (sin_t / norm, den / norm) } else { (1.0, 0.0) };
        let (sin_phi, cos_phi) = (2.0 * PI * rng.gen::<f64>()).sin_cos();
        *dir = rotate(dir, cos_psi, sin_psi, cos_phi, sin_phi);
        (energy - transfer).max(0.0)
    }
}

fn point(p: &Vec3, e: f64) -> TrajectoryPoint {
    TrajectoryPoint { position_nm: [p.x, p.y, p.z], energy_ev: e }
}

/// Rotates unit vector `d` by polar angle `psi` about azimuth `phi`.
#[cfg(test)]
fn deflect(d: &Vec3, psi: f64, phi: f64) -> Vec3 {
    let (sp, cp) = psi.sin_cos();
    let (sf, cf) = phi.sin_cos();
    rotate(d, cp, sp, cf, sf)
}

fn rotate(d: &Vec3, cos_psi: f64, sin_psi: f64, cos_phi: f64, sin_phi: f64) -> Vec3 {
    let perp = (1.0 - d.z * d.z).max(0.0).sqrt();
    let out = if perp < 1e-6 {
        let s = d.z.signum();
        Vec3::new(sin_psi * cos_phi, sin_psi * sin_phi, s * cos_psi)
    } else {
        Vec3::new(
            d.x * cos_psi + sin_psi * (d.x * d.z * cos_phi - d.y * sin_phi) / perp,
            d.y * cos_psi + sin_psi * (d.y * d.z * cos_phi + d.x * sin_phi) / perp,
            d.z * cos_psi - sin_psi * cos_phi * perp,
        )
    };
    out.normalize()
}

/// Full BCA history of `ion` in `geometry` from `start`, recording every
/// flight and collision.
pub fn transport_ion<G: Geometry + ?Sized, R: Rng + ?Sized>(
    ion: &IonSpecies,
    geometry: &G,
    start: &StartState,
    model: &StoppingModel,
    rng: &mut R,
) -> Result<TrajectoryRecord, StoppingError> {
    Transporter::new(ion, geometry, *model)?.run(start, rng, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stopping::{SlabLayer, SlabStack, TargetMaterial};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normal_start(e: f64) -> StartState {
        StartState { position_nm: Vec3::zeros(), direction: Vec3::z(), energy_ev: e }
    }

    #[test]
    fn vacuum_only_leaves_ion_untouched() {
        let g = SlabStack::new(0.0, 500.0, vec![], vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let start = StartState {
            position_nm: Vec3::zeros(),
            direction: Vec3::new(0.1, 0.0, 1.0).normalize(),
            energy_ev: 2.9e6,
        };
        let rec = transport_ion(&IonSpecies::silicon(), &g, &start, &StoppingModel::default(), &mut rng).unwrap();
        match rec.termination {
            Termination::Exited { energy_ev, direction, position_nm } => {
                assert_eq!(energy_ev, 2.9e6);
                let d = Vec3::from(direction);
                assert!((d - start.direction).norm() < 1e-12);
                assert!((position_nm[2] - 500.0).abs() < 1e-3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn thick_slab_contains_ion() {
        let g = SlabStack::single(TargetMaterial::diamond(), 5000.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rec =
            transport_ion(&IonSpecies::silicon(), &g, &normal_start(1e6), &StoppingModel::default(), &mut rng).unwrap();
        assert_eq!(rec.termination, Termination::StoppedInMaterial);
        let z = rec.final_point().position_nm[2];
        assert!(z > 0.0 && z <= 5000.0);
        for w in rec.points.windows(2) {
            assert!(w[1].energy_ev <= w[0].energy_ev);
        }
    }

    #[test]
    fn thin_slab_transmits_with_energy_loss() {
        let g = SlabStack::new(
            0.0,
            300.0,
            vec![SlabLayer { z_start_nm: 100.0, z_end_nm: 200.0, material: 0 }],
            vec![TargetMaterial::diamond()],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rec =
            transport_ion(&IonSpecies::silicon(), &g, &normal_start(2.9e6), &StoppingModel::default(), &mut rng).unwrap();
        match rec.termination {
            Termination::Exited { energy_ev, .. } => assert!(energy_ev < 2.9e6 && energy_ev > 2.0e6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_start() {
        let g = SlabStack::single(TargetMaterial::diamond(), 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = StoppingModel::default();
        let si = IonSpecies::silicon();
        assert!(transport_ion(&si, &g, &normal_start(500.0), &m, &mut rng).is_err());
        let outside = StartState { position_nm: Vec3::new(0.0, 0.0, -5.0), ..normal_start(1e6) };
        assert!(transport_ion(&si, &g, &outside, &m, &mut rng).is_err());
    }

    #[test]
    fn deflect_preserves_angle() {
        let d = Vec3::new(0.3, -0.2, 0.9).normalize();
        let n = deflect(&d, 0.4, 1.3);
        assert!((n.dot(&d) - 0.4f64.cos()).abs() < 1e-12);
        assert!((n.norm() - 1.0).abs() < 1e-12);
    }
}
