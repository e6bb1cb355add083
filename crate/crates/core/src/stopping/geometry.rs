use nalgebra::Vector3;

use super::material::TargetMaterial;
use super::StoppingError;

pub type Vec3 = Vector3<f64>;

/// What occupies a point of a transport geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Vacuum,
    /// Index into [`Geometry::materials`].
    Material(usize),
    /// Beyond the simulated volume; a history reaching it has exited.
    Outside,
}

/// Material-region description consumed by the transport loop. Lengths in nm.
pub trait Geometry: Sync {
    fn materials(&self) -> &[TargetMaterial];

    fn region(&self, p: &Vec3) -> Region;

    /// Distance along the unit vector `dir` to the next surface where the
    /// region may change; infinite if the ray never meets one.
    fn distance_to_boundary(&self, p: &Vec3, dir: &Vec3) -> f64;

    /// Lower bound on the distance from `p` to any region boundary. The
    /// default of zero disables range rejection.
    fn safety(&self, _p: &Vec3) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabLayer {
    pub z_start_nm: f64,
    pub z_end_nm: f64,
    pub material: usize,
}

/// Laterally infinite layers stacked along z inside `[z_min, z_max]`; gaps
/// between layers are vacuum.
#[derive(Debug, Clone)]
pub struct SlabStack {
    z_min: f64,
    z_max: f64,
    layers: Vec<SlabLayer>,
    materials: Vec<TargetMaterial>,
    planes: Vec<f64>,
}

impl SlabStack {
    pub fn new(
        z_min_nm: f64,
        z_max_nm: f64,
        mut layers: Vec<SlabLayer>,
        materials: Vec<TargetMaterial>,
    ) -> Result<Self, StoppingError> {
        if !(z_max_nm > z_min_nm) {
            return Err(StoppingError::Config("empty slab domain".into()));
        }
        for l in &layers {
            if !(l.z_end_nm > l.z_start_nm) {
                return Err(StoppingError::Config(format!("layer {l:?} has no thickness")));
            }
            if l.z_start_nm < z_min_nm || l.z_end_nm > z_max_nm {
                return Err(StoppingError::Config(format!("layer {l:?} outside the domain")));
            }
            if l.material >= materials.len() {
                return Err(StoppingError::Config(format!("layer {l:?} references a missing material")));
            }
        }
        layers.sort_by(|a, b| a.z_start_nm.total_cmp(&b.z_start_nm));
        for w in layers.windows(2) {
            if w[1].z_start_nm < w[0].z_end_nm {
                return Err(StoppingError::OverlappingRegions(format!(
                    "[{}, {}] and [{}, {}]",
                    w[0].z_start_nm, w[0].z_end_nm, w[1].z_start_nm, w[1].z_end_nm
                )));
            }
        }
        let mut planes = vec![z_min_nm, z_max_nm];
        for l in &layers {
            planes.push(l.z_start_nm);
            planes.push(l.z_end_nm);
        }
        planes.sort_by(f64::total_cmp);
        planes.dedup();
        Ok(Self { z_min: z_min_nm, z_max: z_max_nm, layers, materials, planes })
    }

    /// One material filling `[0, thickness]`.
    pub fn single(material: TargetMaterial, thickness_nm: f64) -> Result<Self, StoppingError> {
        Self::new(
            0.0,
            thickness_nm,
            vec![SlabLayer { z_start_nm: 0.0, z_end_nm: thickness_nm, material: 0 }],
            vec![material],
        )
    }
}

impl Geometry for SlabStack {
    fn materials(&self) -> &[TargetMaterial] {
        &self.materials
    }

    fn region(&self, p: &Vec3) -> Region {
        let z = p.z;
        if !(z >= self.z_min && z <= self.z_max) {
            return Region::Outside;
        }
        self.layers
            .iter()
            .find(|l| z >= l.z_start_nm && z < l.z_end_nm)
            .map_or(Region::Vacuum, |l| Region::Material(l.material))
    }

    fn distance_to_boundary(&self, p: &Vec3, dir: &Vec3) -> f64 {
        if dir.z == 0.0 {
            return f64::INFINITY;
        }
        self.planes
            .iter()
            .map(|&zp| (zp - p.z) / dir.z)
            .filter(|&t| t > 1e-12)
            .fold(f64::INFINITY, f64::min)
    }

    fn safety(&self, p: &Vec3) -> f64 {
        self.planes.iter().map(|&zp| (zp - p.z).abs()).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlapping_layers_rejected() {
        let r = SlabStack::new(
            0.0,
            100.0,
            vec![
                SlabLayer { z_start_nm: 0.0, z_end_nm: 50.0, material: 0 },
                SlabLayer { z_start_nm: 40.0, z_end_nm: 80.0, material: 0 },
            ],
            vec![TargetMaterial::diamond()],
        );
        assert!(matches!(r, Err(StoppingError::OverlappingRegions(_))));
    }

    #[test]
    fn regions_and_boundaries() {
        let g = SlabStack::new(
            0.0,
            100.0,
            vec![SlabLayer { z_start_nm: 20.0, z_end_nm: 60.0, material: 0 }],
            vec![TargetMaterial::diamond()],
        )
        .unwrap();
        assert_eq!(g.region(&Vec3::new(0.0, 0.0, 10.0)), Region::Vacuum);
        assert_eq!(g.region(&Vec3::new(5.0, 0.0, 30.0)), Region::Material(0));
        assert_eq!(g.region(&Vec3::new(0.0, 0.0, 101.0)), Region::Outside);
        let d = g.distance_to_boundary(&Vec3::new(0.0, 0.0, 10.0), &Vec3::new(0.0, 0.0, 1.0));
        assert!((d - 10.0).abs() < 1e-12);
        assert!((g.safety(&Vec3::new(0.0, 0.0, 30.0)) - 10.0).abs() < 1e-12);
    }
}
