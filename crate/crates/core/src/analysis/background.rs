//! Radial background decay: A·exp(-r/ℓ) + c with a residual runs test.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::optics::ConfocalMap;

use super::fit::{nlls_fit, FitOptions, FitResult, FitStatus, Sample};
use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunsTest {
    pub runs: usize,
    pub positive: usize,
    pub negative: usize,
    pub z: f64,
    /// Two-sided p-value of the normal approximation.
    pub p_value: f64,
}

impl RunsTest {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Wald-Wolfowitz runs test on the signs of `residuals` (zeros skipped).
pub fn runs_test(residuals: &[f64]) -> Option<RunsTest> {
    let signs: Vec<bool> = residuals.iter().filter(|r| **r != 0.0).map(|r| *r > 0.0).collect();
    let pos = signs.iter().filter(|s| **s).count();
    let neg = signs.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let runs = 1 + signs.windows(2).filter(|w| w[0] != w[1]).count();
    let n = (pos + neg) as f64;
    let (a, b) = (pos as f64, neg as f64);
    let mean = 2.0 * a * b / n + 1.0;
    let var = (mean - 1.0) * (mean - 2.0) / (n - 1.0);
    let z = if var > 0.0 { (runs as f64 - mean) / var.sqrt() } else { 0.0 };
    let p_value = 2.0 * (1.0 - Normal::new(0.0, 1.0).unwrap().cdf(z.abs()));
    Some(RunsTest { runs, positive: pos, negative: neg, z, p_value })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackgroundFit {
    /// Parameters: amplitude, decay length, offset.
    pub fit: FitResult,
    pub decay_length: f64,
    pub decay_length_sigma: Option<f64>,
    pub runs: Option<RunsTest>,
}

/// Background rate around `center_um` in annuli of `bin_um`, as
/// (radius µm, counts/s, σ) samples starting at `r_min_um`. Only annuli
/// fully inside the map are kept.
pub fn radial_rate_profile(map: &ConfocalMap, center_um: (f64, f64), bin_um: f64, r_min_um: f64) -> Result<Vec<Sample>, AnalysisError> {
    if !(bin_um > 0.0) || !(r_min_um >= 0.0) {
        return Err(AnalysisError::InvalidInput("bin width must be > 0 and minimum radius >= 0".into()));
    }
    let (x_lo, y_lo) = map.pixel_center_um(-0.5, -0.5);
    let (x_hi, y_hi) = map.pixel_center_um(map.nx as f64 - 0.5, map.ny as f64 - 0.5);
    let r_max = [center_um.0 - x_lo, x_hi - center_um.0, center_um.1 - y_lo, y_hi - center_um.1]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if !(r_max > r_min_um) {
        return Ok(Vec::new());
    }
    let nbins = ((r_max - r_min_um) / bin_um).floor() as usize;
    let mut sum = vec![0.0; nbins];
    let mut n = vec![0usize; nbins];
    for iy in 0..map.ny {
        for ix in 0..map.nx {
            let (x, y) = map.pixel_center_um(ix as f64, iy as f64);
            let r = (x - center_um.0).hypot(y - center_um.1);
            if r < r_min_um {
                continue;
            }
            let k = ((r - r_min_um) / bin_um) as usize;
            if k < nbins {
                sum[k] += map.get(ix, iy) as f64;
                n[k] += 1;
            }
        }
    }
    let dwell_s = map.dwell_ms * 1e-3;
    Ok((0..nbins)
        .filter(|k| n[*k] > 0)
        .map(|k| {
            let mean = sum[k] / n[k] as f64;
            Sample::new(r_min_um + (k as f64 + 0.5) * bin_um, mean / dwell_s, mean.max(1.0).sqrt() / (n[k] as f64).sqrt() / dwell_s)
        })
        .collect())
}

pub fn exponential_background(r: f64, p: &[f64]) -> f64 {
    p[0] * (-r / p[1]).exp() + p[2]
}

fn not_decaying(samples: &[Sample], level: f64) -> BackgroundFit {
    let chi2: f64 = samples.iter().map(|s| ((s.y - level) / s.sigma).powi(2)).sum();
    BackgroundFit {
        fit: FitResult {
            params: vec![0.0, f64::INFINITY, level],
            uncertainties: None,
            residual_norm: chi2.sqrt(),
            degrees_of_freedom: samples.len().saturating_sub(3),
            status: FitStatus::NotConverged,
            iterations: 0,
            cost_history: vec![chi2],
        },
        decay_length: f64::INFINITY,
        decay_length_sigma: None,
        runs: None,
    }
}

/// Fits A·exp(-r/ℓ) + c to `(radius, value, sigma)` samples. Data without
/// a decaying trend give ℓ = ∞ and status `NotConverged`.
pub fn fit_exponential_background(samples: &[Sample]) -> Result<BackgroundFit, AnalysisError> {
    if samples.len() < 4 {
        return Err(AnalysisError::InsufficientData { needed: 4, got: samples.len() });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
    let n = sorted.len();
    let tail = &sorted[n - (n / 5).max(1)..];
    let c0 = tail.iter().map(|s| s.y).sum::<f64>() / tail.len() as f64;
    let head = &sorted[..(n / 5).max(1)];
    let a0 = head.iter().map(|s| s.y).sum::<f64>() / head.len() as f64 - c0;
    let noise = sorted.iter().map(|s| s.sigma).sum::<f64>() / n as f64;
    if !(a0 > 2.0 * noise / (head.len() as f64).sqrt()) {
        return Ok(not_decaying(&sorted, sorted.iter().map(|s| s.y).sum::<f64>() / n as f64));
    }
    // decay length from where the excess first falls below 1/e
    let x0 = sorted[0].x;
    let span = sorted[n - 1].x - x0;
    let l0 = sorted
        .iter()
        .find(|s| s.y - c0 < a0 / std::f64::consts::E)
        .map(|s| (s.x - x0).max(span / n as f64))
        .unwrap_or(span);
    let guess = [a0 * (x0 / l0).exp(), l0, c0];
    let fit = nlls_fit(exponential_background, &sorted, &guess, &FitOptions::default())?;
    if !(fit.params[1] > 0.0) || !(fit.params[0] > 0.0) || fit.params[1] > 1e3 * span {
        return Ok(not_decaying(&sorted, c0));
    }
    let residuals: Vec<f64> = sorted.iter().map(|s| s.y - exponential_background(s.x, &fit.params)).collect();
    Ok(BackgroundFit {
        decay_length: fit.params[1],
        decay_length_sigma: fit.sigma(1),
        runs: runs_test(&residuals),
        fit,
    })
}
