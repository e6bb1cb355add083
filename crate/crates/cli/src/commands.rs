//! The pipeline stages: plan → transport → synth → analyze → report.

use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sivplant::analysis::{
    detect_spots, extract_yield_curve, fit_g2, fit_lorentzian_zpl, g2_model, mark_plan_positions, G2Fit, G2Options,
    SpotDetection, SpotMeasurement, SpotOptions, Spectrum, YieldSettings, ZplOutcome,
};
use sivplant::optics::{generate_emitter_field, simulate_hbt, synthesize_confocal_map, ConfocalMap, CoincidenceHistogram, Region};
use sivplant::pinhole::{
    radial_density_profile, scattered_to_direct_ratio, simulate_pinhole, simulate_pinhole_multi, write_profile_csv,
    BeamConfig, SamplePlaneTally,
};
use sivplant::rng::derive;
use sivplant::stats::{plan_session, single_emitter_fraction, spot_area_cm2, ImplantPlan};

use crate::artifacts::{self, read_json, require, OutputDir, ANALYSIS_JSON, HBT_JSON, MAP_BIN, PLAN_JSON};
use crate::config::{Provenance, RunConfig};
use crate::Failure;

/// What a stage leaves behind besides its files.
#[derive(Debug, Default)]
pub struct StageReport {
    pub warnings: Vec<String>,
    pub unconverged: Vec<String>,
    pub written: Vec<PathBuf>,
}

fn finish(out: OutputDir, warnings: Vec<String>, unconverged: Vec<String>) -> StageReport {
    StageReport { warnings, unconverged, written: out.written().to_vec() }
}

pub fn plan(config: RunConfig, dir: &Path) -> Result<StageReport, Failure> {
    let spec = config.session_spec()?;
    let plan = plan_session(&spec, &config.yield_model())?;
    let mut out = OutputDir::create(dir, Provenance::new("plan", &config))?;
    out.csv("plan.csv", |w| plan.write_csv(w))?;
    out.json(PLAN_JSON, &plan)?;
    info!("session {}: {} spots at {} MeV", plan.label, plan.spots.len(), plan.energy_mev);
    let warnings = plan.warnings.clone();
    Ok(finish(out, warnings, Vec::new()))
}

/// Beam from the config, else at the energy of an existing plan.
fn resolve_beam(config: &mut RunConfig, dir: &Path) -> Result<(), Failure> {
    if config.transport.beam.is_some() {
        return Ok(());
    }
    let plan_path = dir.join(PLAN_JSON);
    if !plan_path.is_file() {
        return Err(Failure::Usage(
            "no beam energy: set [transport.beam] energy_mev, pass --energy-mev or run `sivplant plan` first".into(),
        ));
    }
    let (plan, _) = read_json::<ImplantPlan>(&plan_path, "plan")?;
    config.transport.beam = Some(BeamConfig {
        energy_mev: plan.energy_mev,
        divergence_mrad: 0.3,
        beam_radius_um: None,
        fluence_cm2: 0.0,
        ion: None,
    });
    Ok(())
}

fn summary_row(w: &mut impl Write, t: &SamplePlaneTally) -> std::io::Result<()> {
    let c = t.counters;
    let ratio = scattered_to_direct_ratio(t).map_or(String::new(), |r| format!("{r:.6e}"));
    let fwhm = t.direct_spot_fwhm_um().map_or(String::new(), |f| format!("{f:.4}"));
    writeln!(
        w,
        "{},{},{},{},{},{},{ratio},{fwhm}",
        t.distance_mm, c.launched, c.direct, c.scattered, c.stopped_in_wall, c.blocked
    )
}

pub fn transport(mut config: RunConfig, dir: &Path, sweep: bool) -> Result<StageReport, Failure> {
    resolve_beam(&mut config, dir)?;
    let seed = config.require_seed()?;
    let t = &config.transport;
    if t.histories == 0 {
        return Err(Failure::Usage("histories must be >= 1".into()));
    }
    if t.distances_mm.is_empty() {
        return Err(Failure::Usage("at least one sample distance is required".into()));
    }
    let beam = t.beam.as_ref().expect("resolved").build()?;
    let geom = t.pinhole.build(&[])?;
    let mut out = OutputDir::create(dir, Provenance::new("transport", &config))?;

    let tallies = simulate_pinhole_multi(&beam, &geom, &t.distances_mm, t.histories, derive(seed, "transport"))?;
    let mut warnings = tallies[0].warnings.clone();
    for tally in &tallies {
        let d = tally.distance_mm;
        let profile = radial_density_profile(tally, t.profile_bin_um)?;
        out.csv(&format!("profile_{d}mm.csv"), |w| write_profile_csv(&profile, w))?;
        out.csv(&format!("direct_{d}mm.csv"), |w| tally.direct_histogram.write_csv(w))?;
        out.json(&artifacts::tally_json(d), tally)?;
        if tally.counters.direct == 0 {
            warnings.push(format!("no ion reached the sample directly at {d} mm"));
        }
    }
    out.csv("transport_summary.csv", |w| {
        writeln!(w, "distance_mm,launched,direct,scattered,stopped_in_wall,blocked,scattered_to_direct,direct_fwhm_um")?;
        tallies.iter().try_for_each(|t| summary_row(w, t))
    })?;

    if sweep {
        let mut rows = Vec::new();
        for (i, &energy) in t.sweep_energies_mev.iter().enumerate() {
            let beam = BeamConfig { energy_mev: energy, ..t.beam.clone().expect("resolved") }.build()?;
            for (j, &angle) in t.sweep_wall_angles_deg.iter().enumerate() {
                let g = t.pinhole.build(&[])?.with_wall_angle(angle);
                let s = derive(seed, &format!("sweep/{i}/{j}"));
                let tally = simulate_pinhole(&beam, &g, t.distances_mm[0], t.histories, s)?;
                let (sc, di) = (tally.counters.scattered as f64, tally.counters.direct as f64);
                let ratio = if di > 0.0 { sc / di } else { f64::NAN };
                let sigma = ratio * (1.0 / sc.max(1.0) + 1.0 / di.max(1.0)).sqrt();
                rows.push((energy, angle, ratio, sigma));
            }
        }
        out.csv("wall_angle_sweep.csv", |w| {
            writeln!(w, "energy_mev,wall_angle_deg,scattered_to_direct,sigma")?;
            rows.iter().try_for_each(|(e, a, r, s)| writeln!(w, "{e},{a},{r:.6e},{s:.3e}"))
        })?;
    }
    warnings.dedup();
    Ok(finish(out, warnings, Vec::new()))
}

pub fn synth(config: RunConfig, dir: &Path) -> Result<StageReport, Failure> {
    let seed = config.require_seed()?;
    let distance = *config
        .transport
        .distances_mm
        .first()
        .ok_or_else(|| Failure::Usage("at least one sample distance is required".into()))?;
    let (plan, _) = read_json::<ImplantPlan>(&dir.join(PLAN_JSON), "plan")?;
    let (tally, _) = read_json::<SamplePlaneTally>(&dir.join(artifacts::tally_json(distance)), "transport")?;
    let region = Region::around(plan.spots.iter().map(|s| (s.x_um, s.y_um)), 5.0).expect("plans have spots");
    let options = sivplant::optics::FieldOptions {
        keep_region: config.field.keep_region.or(Some(region)),
        ..config.field
    };
    let field = generate_emitter_field(&plan, &config.yield_model(), &tally, &options, derive(seed, "field"))?;
    let mut map = synthesize_confocal_map(&field, &config.optics, &region, derive(seed, "map"))?;

    let mut out = OutputDir::create(dir, Provenance::new("synth", &config))?;
    map.provenance = format!("{}; {}", out.provenance().line(), map.provenance);
    out.csv("emitters.csv", |w| {
        writeln!(w, "x_um,y_um,depth_nm,brightness_cps,origin")?;
        field.emitters.iter().try_for_each(|e| {
            writeln!(w, "{:.4},{:.4},{:.1},{:.2},{:?}", e.x_um, e.y_um, e.depth_nm, e.brightness_cps, e.origin)
        })
    })?;
    out.raw(MAP_BIN, |w| Ok(map.write_binary(w)?))?;
    out.csv("map.csv", |w| map.write_csv(w))?;

    let mut warnings = Vec::new();
    if config.hbt.emitters > 0 {
        let hist = simulate_hbt(config.hbt.emitters, &config.hbt.settings, derive(seed, "hbt"))?;
        warnings.extend(hist.warnings.iter().cloned());
        out.csv("hbt.csv", |w| hist.write_csv(w))?;
        out.json(HBT_JSON, &hist)?;
    }
    info!("{} emitters ({} spots), map {}x{}", field.len(), plan.spots.len(), map.nx, map.ny);
    Ok(finish(out, warnings, Vec::new()))
}

#[derive(Serialize)]
struct AnalysisOut<'a> {
    detection: &'a SpotDetection,
    g2: Option<&'a G2Fit>,
    zpl: Option<&'a ZplOutcome>,
}

#[derive(Deserialize)]
struct AnalysisIn {
    detection: SpotDetection,
}

fn g2_curve(w: &mut impl Write, hist: &CoincidenceHistogram, fit: &G2Fit) -> std::io::Result<()> {
    writeln!(w, "delay_ns,g2_measured,g2_model")?;
    for (d, c) in hist.delays_ns().iter().zip(&hist.counts) {
        let model = g2_model(*d, &fit.fit.params);
        writeln!(w, "{d:.4},{:.6},{model:.6}", *c as f64 / fit.plateau_counts)?;
    }
    Ok(())
}

pub fn analyze(config: RunConfig, dir: &Path, map_path: Option<&Path>, spectrum: Option<&Path>) -> Result<StageReport, Failure> {
    let map_path = map_path.map_or_else(|| dir.join(MAP_BIN), Path::to_path_buf);
    require(&map_path, "synth")?;
    let file = std::fs::File::open(&map_path).map_err(|e| Failure::Io(format!("{}: {e}", map_path.display())))?;
    let map = ConfocalMap::read_binary(std::io::BufReader::new(file))?;
    let options = SpotOptions {
        psf_fwhm_nm: config.optics.psf_fwhm_nm(),
        threshold_sigma: config.analysis.threshold_sigma,
        ..SpotOptions::default()
    };
    let mut detection = detect_spots(&map, &options)?;
    let plan_path = dir.join(PLAN_JSON);
    if plan_path.is_file() {
        let (plan, _) = read_json::<ImplantPlan>(&plan_path, "plan")?;
        let planned: Vec<(f64, f64)> = plan.spots.iter().map(|s| (s.x_um, s.y_um)).collect();
        mark_plan_positions(&mut detection.spots, &planned, config.analysis.plan_tolerance_um);
    }

    let mut unconverged = Vec::new();
    let hbt_path = dir.join(HBT_JSON);
    let g2 = if hbt_path.is_file() {
        let (hist, _) = read_json::<CoincidenceHistogram>(&hbt_path, "synth")?;
        let opts = G2Options { bunching: config.analysis.g2_bunching, plateau_min_delay_ns: config.analysis.g2_plateau_min_delay_ns };
        let fit = fit_g2(&hist, &opts)?;
        if !fit.fit.converged() {
            unconverged.push(format!("g2 fit: {:?}", fit.fit.status));
        }
        Some((hist, fit))
    } else {
        None
    };
    let zpl = match spectrum {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            let outcome = fit_lorentzian_zpl(&Spectrum::from_csv(&text)?)?;
            if let ZplOutcome::Line(f) = &outcome {
                if !f.fit.converged() {
                    unconverged.push(format!("ZPL fit: {:?}", f.fit.status));
                }
            }
            Some(outcome)
        }
        None => None,
    };

    let mut out = OutputDir::create(dir, Provenance::new("analyze", &config))?;
    out.csv("spots.csv", |w| {
        writeln!(w, "x_um,y_um,peak_rate_cps,integrated_rate_cps,area_ratio,fwhm_nm,larger_than_psf,saturated,snr,on_plan")?;
        detection.spots.iter().try_for_each(|s| {
            let fwhm = s.fwhm_nm.map_or(String::new(), |f| format!("{f:.1}"));
            let on_plan = s.on_plan_position.map_or(String::new(), |b| b.to_string());
            writeln!(
                w,
                "{:.4},{:.4},{:.2},{:.2},{:.4},{fwhm},{},{},{:.2},{on_plan}",
                s.x_um, s.y_um, s.peak_rate_cps, s.integrated_rate_cps, s.area_ratio, s.larger_than_psf, s.saturated, s.snr
            )
        })
    })?;
    if let Some((hist, fit)) = &g2 {
        out.csv("g2_fit.csv", |w| g2_curve(w, hist, fit))?;
    }
    out.json(ANALYSIS_JSON, &AnalysisOut { detection: &detection, g2: g2.as_ref().map(|(_, f)| f), zpl: zpl.as_ref() })?;
    info!(
        "{} spots above {:.1} counts/pixel (background {:.2} +/- {:.2})",
        detection.spots.len(),
        detection.threshold,
        detection.background.mean,
        detection.background.std
    );
    if let Some((_, f)) = &g2 {
        info!("g2(0) = {:.3}, single emitter: {}", f.g2_zero, f.single_emitter);
    }
    Ok(finish(out, Vec::new(), unconverged))
}

pub fn report(config: RunConfig, dir: &Path) -> Result<StageReport, Failure> {
    let (plan, _) = read_json::<ImplantPlan>(&dir.join(PLAN_JSON), "plan")?;
    let (analysis, _) = read_json::<AnalysisIn>(&dir.join(ANALYSIS_JSON), "analyze")?;
    let spots = &analysis.detection.spots;
    let tol = config.analysis.plan_tolerance_um;
    let matched: Vec<_> = plan
        .lattice()
        .map(|p| {
            let hit = spots
                .iter()
                .filter(|s| (s.x_um - p.x_um).hypot(s.y_um - p.y_um) <= tol)
                .min_by(|a, b| (a.x_um - p.x_um).hypot(a.y_um - p.y_um).total_cmp(&(b.x_um - p.x_um).hypot(b.y_um - p.y_um)));
            (p, hit)
        })
        .collect();
    let measurements: Vec<SpotMeasurement> = matched
        .iter()
        .map(|(p, hit)| match hit {
            Some(s) => SpotMeasurement::from_spot(plan.energy_mev, p.fluence_cm2, s),
            None => SpotMeasurement::undetected(plan.energy_mev, p.fluence_cm2),
        })
        .collect();
    let settings = YieldSettings {
        calibration: config.calibration,
        spot_area_cm2: spot_area_cm2(plan.spot_diameter_um),
        ..YieldSettings::default()
    };
    let curve = extract_yield_curve(&measurements, &settings)?;

    let mut out = OutputDir::create(dir, Provenance::new("report", &config))?;
    out.csv("spot_matches.csv", |w| {
        writeln!(w, "x_um,y_um,fluence_cm2,expected_emitters,p_single,detected,emitters_estimate")?;
        matched.iter().zip(&measurements).try_for_each(|((p, hit), m)| {
            let p1 = single_emitter_fraction(p.expected_emitters).unwrap_or(f64::NAN);
            writeln!(
                w,
                "{},{},{:e},{:.4},{p1:.4},{},{:.3}",
                p.x_um,
                p.y_um,
                p.fluence_cm2,
                p.expected_emitters,
                hit.is_some(),
                m.emitters(&settings.calibration)
            )
        })
    })?;
    out.csv("yields.csv", |w| curve.write_csv(w))?;
    let detected = matched.iter().filter(|(_, h)| h.is_some()).count();
    let off_plan = spots.iter().filter(|s| s.on_plan_position == Some(false)).count();
    info!("{detected}/{} planned spots detected, {off_plan} detections off the plan", matched.len());
    for r in &curve.rows {
        info!("fluence {:.2e}: {:.2} emitters/spot, yield {:.4} +/- {:.4}", r.fluence_cm2, r.mean_emitters, r.activation_yield, r.yield_sigma);
    }
    let warnings = analysis
        .detection
        .spots
        .iter()
        .filter(|s| s.saturated)
        .map(|s| format!("saturated spot at ({:.2}, {:.2}) um: its rate is a lower bound", s.x_um, s.y_um))
        .collect::<Vec<_>>();
    Ok(finish(out, warnings, Vec::new()))
}
