//! Spot detection in photoluminescence maps.

use serde::{Deserialize, Serialize};

use crate::optics::{ConfocalMap, FWHM_PER_SIGMA};

use super::fit::{nlls_fit, FitOptions, Sample};
use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpotOptions {
    pub psf_fwhm_nm: f64,
    /// Detection threshold above background, in background standard deviations.
    pub threshold_sigma: f64,
    /// Maxima closer than this are one spot; `None` means one PSF FWHM.
    pub merge_distance_um: Option<f64>,
    /// Half-width of the fit and integration window; `None` picks
    /// max(4 FWHM, 1.6 µm).
    pub window_half_um: Option<f64>,
}

impl Default for SpotOptions {
    fn default() -> Self {
        Self { psf_fwhm_nm: 0.51 * 738.0 / 0.95, threshold_sigma: 5.0, merge_distance_um: None, window_half_um: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundLevel {
    pub mean: f64,
    pub std: f64,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotRecord {
    pub x_um: f64,
    pub y_um: f64,
    /// Background-subtracted focal-spot rate, counts/s.
    pub peak_rate_cps: f64,
    /// Integrated rate expressed as the focal-spot rate of an equal number
    /// of point emitters, counts/s.
    pub integrated_rate_cps: f64,
    /// Implanted-spot to focal-spot area ratio, at least 1.
    pub area_ratio: f64,
    /// Major-axis FWHM of the elliptical Gaussian fit.
    pub fwhm_nm: Option<f64>,
    pub larger_than_psf: bool,
    pub saturated: bool,
    pub snr: f64,
    pub on_plan_position: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotDetection {
    pub background: BackgroundLevel,
    pub threshold: f64,
    pub spots: Vec<SpotRecord>,
}

fn gaussian_kernel(sigma_px: f64) -> Vec<f64> {
    let half = (3.0 * sigma_px).ceil() as isize;
    let mut k: Vec<f64> = (-half..=half).map(|i| (-0.5 * (i as f64 / sigma_px).powi(2)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable convolution with edge clamping.
fn smooth(data: &[f64], nx: usize, ny: usize, kernel: &[f64]) -> Vec<f64> {
    let h = (kernel.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; data.len()];
    for y in 0..ny {
        for x in 0..nx {
            tmp[y * nx + x] =
                kernel.iter().enumerate().map(|(k, w)| w * data[y * nx + clamp(x as isize + k as isize - h, nx)]).sum();
        }
    }
    let mut out = vec![0.0; data.len()];
    for y in 0..ny {
        for x in 0..nx {
            out[y * nx + x] =
                kernel.iter().enumerate().map(|(k, w)| w * tmp[clamp(y as isize + k as isize - h, ny) * nx + x]).sum();
        }
    }
    out
}

/// Mean and standard deviation after iterative 3σ clipping (5 passes).
fn sigma_clipped(values: &[f64]) -> Option<BackgroundLevel> {
    let mut keep: Vec<f64> = values.to_vec();
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        (m, var.sqrt())
    };
    for _ in 0..5 {
        if keep.is_empty() {
            return None;
        }
        let (m, s) = stats(&keep);
        let before = keep.len();
        keep.retain(|x| (x - m).abs() <= 3.0 * s);
        if keep.len() == before {
            break;
        }
    }
    if keep.is_empty() {
        return None;
    }
    let (mean, std) = stats(&keep);
    Some(BackgroundLevel { mean, std, pixels: keep.len() })
}

/// Clipped mean of the raw pixels in a square ring just outside the spot window.
fn local_background(raw: &[f64], nx: usize, ny: usize, (x, y): (usize, usize), inner: isize, ring: isize) -> Option<f64> {
    let outer = inner + ring;
    let mut ring_values = Vec::new();
    for dy in -outer..=outer {
        for dx in -outer..=outer {
            if dx.abs().max(dy.abs()) <= inner {
                continue;
            }
            let (xx, yy) = (x as isize + dx, y as isize + dy);
            if xx >= 0 && yy >= 0 && (xx as usize) < nx && (yy as usize) < ny {
                ring_values.push(raw[yy as usize * nx + xx as usize]);
            }
        }
    }
    if ring_values.len() < 20 {
        return None;
    }
    sigma_clipped(&ring_values).map(|b| b.mean)
}

fn elliptical_gaussian(dx: f64, dy: f64, p: &[f64]) -> f64 {
    p[0] * (-0.5 * ((dx - p[1]) / p[3]).powi(2) - 0.5 * ((dy - p[2]) / p[4]).powi(2)).exp() + p[5]
}

/// Finds PL spots: local maxima of a lightly smoothed map above
/// background + k·σ, merged when closer than the merge distance or not
/// separated by a clear dip. Each spot gets a quadratic sub-pixel peak,
/// an elliptical Gaussian fit and an integrated rate.
pub fn detect_spots(map: &ConfocalMap, options: &SpotOptions) -> Result<SpotDetection, AnalysisError> {
    if !(options.psf_fwhm_nm > 0.0 && options.threshold_sigma > 0.0) {
        return Err(AnalysisError::InvalidInput("PSF FWHM and threshold must be positive".into()));
    }
    let (nx, ny) = (map.nx, map.ny);
    let pix = map.pixel_um();
    let fwhm_um = options.psf_fwhm_nm * 1e-3;
    let sigma_psf_px = fwhm_um / FWHM_PER_SIGMA / pix;
    let raw: Vec<f64> = map.counts.iter().map(|c| *c as f64).collect();
    let saturated: Vec<bool> = map.counts.iter().map(|c| *c >= map.saturation).collect();

    let sigma_s = 0.5 * sigma_psf_px;
    let (smoothed, kernel_power) = if sigma_s >= 0.3 {
        let k = gaussian_kernel(sigma_s);
        let p1: f64 = k.iter().map(|w| w * w).sum();
        (smooth(&raw, nx, ny, &k), p1 * p1)
    } else {
        (raw.clone(), 1.0)
    };
    let usable: Vec<f64> = smoothed.iter().zip(&saturated).filter(|(_, s)| !**s).map(|(v, _)| *v).collect();
    let mut background = sigma_clipped(&usable)
        .ok_or_else(|| AnalysisError::ThresholdUndefined("no unsaturated background pixels".into()))?;
    // shot-noise floor of the smoothed background
    background.std = background.std.max((background.mean.max(1.0) * kernel_power).sqrt());
    let threshold = background.mean + options.threshold_sigma * background.std;

    let at = |x: usize, y: usize| smoothed[y * nx + x];
    let mut maxima: Vec<(usize, usize, f64)> = Vec::new();
    for y in 0..ny {
        for x in 0..nx {
            let v = at(x, y);
            if !(v > threshold) {
                continue;
            }
            let mut is_max = true;
            'n: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (xx, yy) = (x as isize + dx, y as isize + dy);
                    if xx < 0 || yy < 0 || xx >= nx as isize || yy >= ny as isize {
                        continue;
                    }
                    let w = at(xx as usize, yy as usize);
                    // ties resolve toward the earlier pixel
                    if w > v || (w == v && (yy as usize * nx + xx as usize) < y * nx + x) {
                        is_max = false;
                        break 'n;
                    }
                }
            }
            if is_max {
                maxima.push((x, y, v));
            }
        }
    }
    maxima.sort_by(|a, b| b.2.total_cmp(&a.2));

    let merge_px = options.merge_distance_um.unwrap_or(fwhm_um) / pix;
    let mut accepted: Vec<(usize, usize, f64)> = Vec::new();
    for m in maxima {
        let joined = accepted.iter().any(|a| {
            let d = ((a.0 as f64 - m.0 as f64).powi(2) + (a.1 as f64 - m.1 as f64).powi(2)).sqrt();
            if d < merge_px {
                return true;
            }
            // no dip between the two: same extended spot
            let steps = d.ceil() as usize;
            let floor = background.mean + 0.75 * (m.2 - background.mean);
            (0..=steps).all(|s| {
                let t = s as f64 / steps as f64;
                let x = (a.0 as f64 + t * (m.0 as f64 - a.0 as f64)).round() as usize;
                let y = (a.1 as f64 + t * (m.1 as f64 - a.1 as f64)).round() as usize;
                at(x, y) >= floor
            })
        });
        if !joined {
            accepted.push(m);
        }
    }

    let dwell_s = map.dwell_ms * 1e-3;
    let half_um = options.window_half_um.unwrap_or((4.0 * fwhm_um).max(1.6));
    let half_px = (half_um / pix).ceil() as isize;
    let ring_px = ((0.5 / pix).ceil() as isize).max(3);
    let psf_area_px = 2.0 * std::f64::consts::PI * sigma_psf_px * sigma_psf_px;
    let mut spots = Vec::with_capacity(accepted.len());
    for (x, y, v) in accepted {
        // quadratic interpolation through the smoothed neighbours
        let sub = |l: f64, c: f64, r: f64| {
            let den = l - 2.0 * c + r;
            if den < 0.0 {
                (0.5 * (l - r) / den).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        };
        let fx = if x > 0 && x + 1 < nx { sub(at(x - 1, y), v, at(x + 1, y)) } else { 0.0 };
        let fy = if y > 0 && y + 1 < ny { sub(at(x, y - 1), v, at(x, y + 1)) } else { 0.0 };
        let (qx, qy) = (x as f64 + fx, y as f64 + fy);

        let (x0, x1) = ((x as isize - half_px).max(0) as usize, ((x as isize + half_px) as usize).min(nx - 1));
        let (y0, y1) = ((y as isize - half_px).max(0) as usize, ((y as isize + half_px) as usize).min(ny - 1));
        let wx = x1 - x0 + 1;
        let local = local_background(&raw, nx, ny, (x, y), half_px, ring_px).unwrap_or(background.mean);
        let mut samples = Vec::with_capacity(wx * (y1 - y0 + 1));
        let mut excess = 0.0;
        let mut any_saturated = false;
        for yy in y0..=y1 {
            for xx in x0..=x1 {
                let c = raw[yy * nx + xx];
                any_saturated |= saturated[yy * nx + xx];
                excess += c - local;
                samples.push(Sample::new(samples.len() as f64, c, c.max(1.0).sqrt()));
            }
        }
        let coords = |i: f64| {
            let i = i as usize;
            ((x0 + i % wx) as f64, (y0 + i / wx) as f64)
        };
        let amp0 = raw[y * nx + x] - local;
        let guess = [amp0.max(1.0), qx, qy, sigma_psf_px, sigma_psf_px, local];
        let fit = nlls_fit(
            |i, p| {
                let (px, py) = coords(i);
                elliptical_gaussian(px, py, p)
            },
            &samples,
            &guess,
            &FitOptions::default(),
        )
        .ok()
        .filter(|f| {
            let p = &f.params;
            f.converged()
                && p[0] > 0.0
                && (p[1] - qx).abs() <= half_px as f64
                && (p[2] - qy).abs() <= half_px as f64
                && p[3].abs() > 0.1
                && p[4].abs() > 0.1
        });
        let (cx, cy, fwhm_nm, peak_counts) = match &fit {
            Some(f) => {
                let p = &f.params;
                let major = p[3].abs().max(p[4].abs());
                (p[1], p[2], Some(major * FWHM_PER_SIGMA * map.pixel_size_nm), p[0])
            }
            None => (qx, qy, None, v - background.mean),
        };
        let (xu, yu) = map.pixel_center_um(cx, cy);
        let peak_rate_cps = peak_counts.max(0.0) / dwell_s;
        let integrated_rate_cps = (excess / psf_area_px).max(0.0) / dwell_s;
        let area_ratio = if peak_rate_cps > 0.0 { (integrated_rate_cps / peak_rate_cps).max(1.0) } else { 1.0 };
        spots.push(SpotRecord {
            x_um: xu,
            y_um: yu,
            peak_rate_cps,
            integrated_rate_cps,
            area_ratio,
            fwhm_nm,
            larger_than_psf: fwhm_nm.is_some_and(|f| f > 1.3 * options.psf_fwhm_nm),
            saturated: any_saturated,
            snr: (v - background.mean) / background.std,
            on_plan_position: None,
        });
    }
    spots.sort_by(|a, b| a.y_um.total_cmp(&b.y_um).then(a.x_um.total_cmp(&b.x_um)));
    Ok(SpotDetection { background, threshold, spots })
}

/// Flags each spot by whether a planned position lies within `tolerance_um`.
pub fn mark_plan_positions(spots: &mut [SpotRecord], planned: &[(f64, f64)], tolerance_um: f64) {
    for s in spots {
        s.on_plan_position = Some(planned.iter().any(|(x, y)| (s.x_um - x).hypot(s.y_um - y) <= tolerance_um));
    }
}
