//! Monte Carlo of the masked beam: sample, classify, transport, project.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::rng::substream;
use crate::stopping::geometry::{Geometry, Vec3};
use crate::stopping::transport::{StartState, Transporter};
use crate::stopping::{StoppingModel, Termination};

use super::geometry::PinholeGeometry;
use super::tally::{Impact, ImpactKind, SamplePlaneTally, DEFAULT_SCATTERED_BIN_UM};
use super::{BeamSpec, PinholeError};

/// Fate of one history before projection onto a sample plane.
#[derive(Debug, Clone, Copy)]
enum Outcome {
    /// Straight line through the open bore; `origin` on the lab plane z = 0.
    Direct { origin: Vec3, dir: Vec3 },
    Scattered { exit: Vec3, dir: Vec3, energy_ev: f64 },
    Stopped,
    Blocked,
}

struct Run {
    outcomes: Vec<Outcome>,
    warnings: Vec<String>,
    foil_nm: f64,
}

/// Radius (µm) of the lab-frame disk sampled around the aperture: three
/// aperture radii plus the ring of tapered wall thin enough to transmit,
/// widened for tilt.
pub fn sampling_radius_um(beam: &BeamSpec, geom: &PinholeGeometry, electronic_range_um: f64) -> f64 {
    let sin = geom.wall_angle_deg.to_radians().sin();
    let tilt = geom.tilt_horizontal_deg.abs().max(geom.tilt_vertical_deg.abs()).to_radians();
    let r = 3.0 * geom.aperture_radius_um() + electronic_range_um / sin + geom.foil_thickness_um * tilt.tan();
    beam.beam_radius_um.map_or(r, |b| b.min(r))
}

fn run_histories(beam: &BeamSpec, geom: &PinholeGeometry, n_histories: u64, seed: u64) -> Result<Run, PinholeError> {
    if n_histories == 0 {
        return Err(PinholeError::Config("n_histories must be >= 1".into()));
    }
    geom.validate()?;
    let mut warnings = beam.validate()?;
    let energy = beam.energy_ev();
    let model = StoppingModel { range_rejection: true, ..StoppingModel::default() };
    let csda = model.csda_range(&beam.ion, &geom.material, energy)?;
    if csda >= geom.foil_thickness_um * 1e3 {
        warnings.push(format!(
            "pinhole not opaque: range {:.2} µm in {} >= foil thickness {} µm",
            csda * 1e-3,
            geom.material.name(),
            geom.foil_thickness_um
        ));
    }
    // path-length bound from electronic losses alone
    let reach_nm = 2.0 * energy.sqrt() / model.electronic_slope(&beam.ion, &geom.material);
    let radius_nm = sampling_radius_um(beam, geom, reach_nm * 1e-3) * 1e3;

    let wall = geom.wall();
    let transporter = Transporter::new(&beam.ion, &wall, model)?;
    let sigma = beam.divergence_mrad * 1e-3 / (2.0 * 2f64.ln()).sqrt();
    let spread = Normal::new(0.0, sigma).map_err(|e| PinholeError::Config(e.to_string()))?;

    let history = |i: u64| -> Result<Outcome, PinholeError> {
        let mut rng = substream(seed, i);
        let r = radius_nm * rng.gen::<f64>().sqrt();
        let phi = 2.0 * PI * rng.gen::<f64>();
        let origin = Vec3::new(r * phi.cos(), r * phi.sin(), 0.0);
        let (ax, ay) = (spread.sample(&mut rng), spread.sample(&mut rng));
        let dir = Vec3::new(ax.tan(), ay.tan(), 1.0).normalize();

        if wall.chord_length(&origin, &dir) <= 0.0 {
            return Ok(Outcome::Direct { origin, dir });
        }
        let entry = wall.upstream_face_point(&origin, &dir) + dir * 1e-6;
        if wall.exit_safety(&entry) > reach_nm {
            return Ok(Outcome::Blocked);
        }
        let start = StartState { position_nm: entry, direction: dir, energy_ev: energy };
        let rec = transporter.run(&start, &mut rng, false)?;
        Ok(match rec.termination {
            Termination::StoppedInMaterial => Outcome::Stopped,
            Termination::Exited { position_nm, direction, energy_ev } => {
                let exit = Vec3::from(position_nm);
                let d = Vec3::from(direction);
                // left through the downstream face, heading for the sample
                let downstream = (wall.to_pinhole_frame(&exit)).z > 0.5 * wall.thickness_nm();
                if downstream && d.z > 0.0 {
                    Outcome::Scattered { exit, dir: d, energy_ev }
                } else {
                    Outcome::Blocked
                }
            }
        })
    };
    let outcomes = (0..n_histories).into_par_iter().map(history).collect::<Result<Vec<_>, _>>()?;
    debug_assert!(wall.region(&Vec3::zeros()) != crate::stopping::Region::Outside);
    Ok(Run { outcomes, warnings, foil_nm: wall.thickness_nm() })
}

fn project(run: &Run, beam: &BeamSpec, distance_mm: f64) -> Result<SamplePlaneTally, PinholeError> {
    if !(distance_mm > 0.0) {
        return Err(PinholeError::Config(format!("distance must be > 0 mm, got {distance_mm}")));
    }
    let plane = run.foil_nm + distance_mm * 1e6;
    let (mut stopped, mut blocked) = (0, 0);
    let mut impacts = Vec::new();
    for o in &run.outcomes {
        let (p, d, e, kind) = match *o {
            Outcome::Direct { origin, dir } => (origin, dir, beam.energy_ev(), ImpactKind::Direct),
            Outcome::Scattered { exit, dir, energy_ev } => (exit, dir, energy_ev, ImpactKind::Scattered),
            Outcome::Stopped => {
                stopped += 1;
                continue;
            }
            Outcome::Blocked => {
                blocked += 1;
                continue;
            }
        };
        let hit = p + d * ((plane - p.z) / d.z);
        impacts.push(Impact { x_um: hit.x * 1e-3, y_um: hit.y * 1e-3, energy_ev: e, kind });
    }
    let mut tally =
        SamplePlaneTally::from_impacts(distance_mm, beam.energy_ev(), impacts, stopped, blocked, DEFAULT_SCATTERED_BIN_UM);
    tally.warnings = run.warnings.clone();
    Ok(tally)
}

/// Follows `n_histories` ions through the pinhole and tallies where they
/// land on a sample plane `distance_mm` behind the foil.
pub fn simulate_pinhole(
    beam: &BeamSpec,
    geom: &PinholeGeometry,
    distance_mm: f64,
    n_histories: u64,
    seed: u64,
) -> Result<SamplePlaneTally, PinholeError> {
    Ok(simulate_pinhole_multi(beam, geom, &[distance_mm], n_histories, seed)?.remove(0))
}

/// Same histories projected onto several sample planes. Each tally equals
/// what [`simulate_pinhole`] returns for that distance and seed.
pub fn simulate_pinhole_multi(
    beam: &BeamSpec,
    geom: &PinholeGeometry,
    distances_mm: &[f64],
    n_histories: u64,
    seed: u64,
) -> Result<Vec<SamplePlaneTally>, PinholeError> {
    if distances_mm.is_empty() {
        return Err(PinholeError::Config("no sample distances given".into()));
    }
    if let Some(d) = distances_mm.iter().find(|d| !(**d > 0.0)) {
        return Err(PinholeError::Config(format!("distance must be > 0 mm, got {d}")));
    }
    let run = run_histories(beam, geom, n_histories, seed)?;
    distances_mm.iter().map(|&d| project(&run, beam, d)).collect()
}
