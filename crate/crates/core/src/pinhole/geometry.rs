//! Conical pinhole in a metal foil.
//!
//! Pinhole frame: the upstream foil face is the plane z = 0, the downstream
//! face z = T, and the bore is the cone ρ < r0 + z·cot(wall_angle), i.e. the
//! aperture is narrowest (radius r0) at the upstream rim and opens toward
//! the exit side. Small wall angles therefore leave a long, thin annulus of
//! metal next to the hole. Tilts rotate the pinhole frame relative to the
//! lab frame, whose z axis is the beam axis.

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use crate::stopping::geometry::{Geometry, Region, Vec3};
use crate::stopping::TargetMaterial;

use super::PinholeError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PinholeGeometry {
    pub diameter_um: f64,
    pub foil_thickness_um: f64,
    /// Angle between the conical wall and the foil plane; 90° is a straight bore.
    pub wall_angle_deg: f64,
    pub tilt_horizontal_deg: f64,
    pub tilt_vertical_deg: f64,
    pub material: TargetMaterial,
}

/// Serializable form with unit-suffixed keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinholeConfig {
    #[serde(default = "default_diameter")]
    pub diameter_um: f64,
    #[serde(default = "default_thickness")]
    pub foil_thickness_um: f64,
    #[serde(default = "default_wall_angle")]
    pub wall_angle_deg: f64,
    #[serde(default)]
    pub tilt_horizontal_deg: f64,
    #[serde(default)]
    pub tilt_vertical_deg: f64,
    #[serde(default = "default_material")]
    pub material: String,
}

fn default_diameter() -> f64 {
    1.0
}
fn default_thickness() -> f64 {
    27.5
}
fn default_wall_angle() -> f64 {
    40.0
}
fn default_material() -> String {
    "steel".into()
}

impl Default for PinholeConfig {
    fn default() -> Self {
        Self {
            diameter_um: default_diameter(),
            foil_thickness_um: default_thickness(),
            wall_angle_deg: default_wall_angle(),
            tilt_horizontal_deg: 0.0,
            tilt_vertical_deg: 0.0,
            material: default_material(),
        }
    }
}

impl PinholeConfig {
    pub fn build(&self, materials: &[TargetMaterial]) -> Result<PinholeGeometry, PinholeError> {
        let material = materials
            .iter()
            .find(|m| m.name() == self.material)
            .cloned()
            .or_else(|| TargetMaterial::builtin(&self.material))
            .ok_or_else(|| PinholeError::Config(format!("unknown pinhole material `{}`", self.material)))?;
        let g = PinholeGeometry {
            diameter_um: self.diameter_um,
            foil_thickness_um: self.foil_thickness_um,
            wall_angle_deg: self.wall_angle_deg,
            tilt_horizontal_deg: self.tilt_horizontal_deg,
            tilt_vertical_deg: self.tilt_vertical_deg,
            material,
        };
        g.validate()?;
        Ok(g)
    }
}

impl PinholeGeometry {
    /// Thorlabs-style 1 µm pinhole in 27.5 µm steel with 40° walls.
    pub fn nominal() -> Self {
        Self {
            diameter_um: 1.0,
            foil_thickness_um: 27.5,
            wall_angle_deg: 40.0,
            tilt_horizontal_deg: 0.0,
            tilt_vertical_deg: 0.0,
            material: TargetMaterial::steel(),
        }
    }

    pub fn with_wall_angle(mut self, deg: f64) -> Self {
        self.wall_angle_deg = deg;
        self
    }

    pub fn validate(&self) -> Result<(), PinholeError> {
        let ok = self.diameter_um > 0.0
            && self.foil_thickness_um > 0.0
            && self.wall_angle_deg > 0.0
            && self.wall_angle_deg <= 90.0
            && self.tilt_horizontal_deg.is_finite()
            && self.tilt_vertical_deg.is_finite()
            && self.diameter_um.is_finite()
            && self.foil_thickness_um.is_finite();
        if ok {
            Ok(())
        } else {
            Err(PinholeError::Config(format!("invalid pinhole geometry {self:?}")))
        }
    }

    pub fn aperture_radius_um(&self) -> f64 {
        0.5 * self.diameter_um
    }

    /// cot(wall angle), exactly zero for vertical walls.
    pub fn wall_cotangent(&self) -> f64 {
        if self.wall_angle_deg >= 90.0 {
            0.0
        } else {
            1.0 / self.wall_angle_deg.to_radians().tan()
        }
    }

    /// Lab-from-pinhole rotation.
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vec3::y_axis(), self.tilt_horizontal_deg.to_radians())
            * Rotation3::from_axis_angle(&Vec3::x_axis(), self.tilt_vertical_deg.to_radians())
    }

    /// Transport view of the foil in nm.
    pub fn wall(&self) -> PinholeWall {
        PinholeWall {
            r0: self.aperture_radius_um() * 1e3,
            thickness: self.foil_thickness_um * 1e3,
            cot: self.wall_cotangent(),
            sin: self.wall_angle_deg.to_radians().sin(),
            to_pinhole: self.rotation().inverse(),
            materials: vec![self.material.clone()],
        }
    }
}

/// The foil as a [`Geometry`]: lab-frame coordinates in nm, simulated
/// volume = the slab between the two foil faces.
#[derive(Debug, Clone)]
pub struct PinholeWall {
    r0: f64,
    thickness: f64,
    cot: f64,
    sin: f64,
    to_pinhole: Rotation3<f64>,
    materials: Vec<TargetMaterial>,
}

impl PinholeWall {
    pub fn thickness_nm(&self) -> f64 {
        self.thickness
    }

    pub fn to_pinhole_frame(&self, v: &Vec3) -> Vec3 {
        self.to_pinhole * v
    }

    pub fn to_lab_frame(&self, v: &Vec3) -> Vec3 {
        self.to_pinhole.inverse() * v
    }

    fn bore_radius(&self, z: f64) -> f64 {
        self.r0 + self.cot * z
    }

    fn is_metal(&self, q: &Vec3) -> bool {
        q.z >= 0.0 && q.z <= self.thickness && (q.x * q.x + q.y * q.y).sqrt() >= self.bore_radius(q.z)
    }

    /// Parameters where the line q + t·d crosses the cone surface; NaN
    /// marks a missing root.
    fn cone_crossings(&self, q: &Vec3, d: &Vec3) -> [f64; 2] {
        let r_q = self.bore_radius(q.z);
        let a = d.x * d.x + d.y * d.y - self.cot * self.cot * d.z * d.z;
        let b = 2.0 * (q.x * d.x + q.y * d.y - self.cot * r_q * d.z);
        let c = q.x * q.x + q.y * q.y - r_q * r_q;
        let mut roots = [f64::NAN; 2];
        if a.abs() < 1e-14 * (b.abs() + c.abs()).max(1e-300) {
            if b != 0.0 {
                roots[0] = -c / b;
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                // numerically stable pair
                let k = -0.5 * (b + b.signum() * disc.sqrt());
                if k != 0.0 {
                    roots = [k / a, c / k];
                } else {
                    roots[0] = 0.0;
                }
            }
        }
        // discard the mirror nappe
        for t in roots.iter_mut() {
            if self.bore_radius(q.z + *t * d.z) < 0.0 {
                *t = f64::NAN;
            }
        }
        roots
    }

    /// Length of the line through `p` (lab frame, any parameter) inside
    /// metal, nm.
    pub fn chord_length(&self, p: &Vec3, dir: &Vec3) -> f64 {
        let q = self.to_pinhole * p;
        let d = (self.to_pinhole * dir).normalize();
        if d.z.abs() < 1e-15 {
            return if q.z >= 0.0 && q.z <= self.thickness && self.is_metal(&q) { f64::INFINITY } else { 0.0 };
        }
        let (t0, t1) = {
            let ta = -q.z / d.z;
            let tb = (self.thickness - q.z) / d.z;
            (ta.min(tb), ta.max(tb))
        };
        let mut cuts = vec![t0, t1];
        cuts.extend(self.cone_crossings(&q, &d).into_iter().filter(|&t| t > t0 && t < t1));
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2)
            .filter(|w| self.is_metal(&(q + d * (0.5 * (w[0] + w[1])))))
            .map(|w| w[1] - w[0])
            .sum()
    }

    /// Lower bound on the distance from `p` to the exit face or the bore,
    /// ignoring the upstream face.
    pub fn exit_safety(&self, p: &Vec3) -> f64 {
        let q = self.to_pinhole * p;
        let cone = ((q.x * q.x + q.y * q.y).sqrt() - self.bore_radius(q.z)).abs() * self.sin;
        cone.min((self.thickness - q.z).abs())
    }

    /// Point where the line through `p` along `dir` meets the upstream face.
    pub fn upstream_face_point(&self, p: &Vec3, dir: &Vec3) -> Vec3 {
        let q = self.to_pinhole * p;
        let d = self.to_pinhole * dir;
        let t = -q.z / d.z;
        p + dir * t
    }
}

impl Geometry for PinholeWall {
    fn materials(&self) -> &[TargetMaterial] {
        &self.materials
    }

    fn region(&self, p: &Vec3) -> Region {
        let q = self.to_pinhole * p;
        if !(q.z >= 0.0 && q.z <= self.thickness) {
            Region::Outside
        } else if (q.x * q.x + q.y * q.y).sqrt() >= self.bore_radius(q.z) {
            Region::Material(0)
        } else {
            Region::Vacuum
        }
    }

    fn distance_to_boundary(&self, p: &Vec3, dir: &Vec3) -> f64 {
        let q = self.to_pinhole * p;
        let d = self.to_pinhole * dir;
        let mut best = f64::INFINITY;
        if d.z != 0.0 {
            for t in [-q.z / d.z, (self.thickness - q.z) / d.z] {
                if t > 1e-9 {
                    best = best.min(t);
                }
            }
        }
        for t in self.cone_crossings(&q, &d) {
            if t > 1e-9 {
                best = best.min(t);
            }
        }
        best
    }

    fn safety(&self, p: &Vec3) -> f64 {
        let q = self.to_pinhole * p;
        let cone = ((q.x * q.x + q.y * q.y).sqrt() - self.bore_radius(q.z)).abs() * self.sin;
        cone.min(q.z.abs()).min((self.thickness - q.z).abs())
    }
}

/// Metal path length (µm) along the straight line entering the upstream side
/// at lab point (x, y, 0) µm with unit direction `direction`.
pub fn path_length_in_wall(geom: &PinholeGeometry, entry_point_um: [f64; 2], direction: [f64; 3]) -> f64 {
    let wall = geom.wall();
    let p = Vec3::new(entry_point_um[0] * 1e3, entry_point_um[1] * 1e3, 0.0);
    let d = Vec3::from(direction).normalize();
    wall.chord_length(&p, &d) * 1e-3
}
