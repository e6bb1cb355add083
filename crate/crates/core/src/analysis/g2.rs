//! Second-order correlation fit and single-emitter verdict.

use serde::Serialize;

use crate::optics::CoincidenceHistogram;

use super::fit::{nlls_fit, FitOptions, FitResult, Sample};
use super::AnalysisError;

/// One-sided 95% quantile of the standard normal.
const Z95: f64 = 1.644_853_626_951_472_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct G2Options {
    /// Fit the three-level form with a bunching shoulder.
    pub bunching: bool,
    /// Bins with |τ| at or beyond this delay set the normalization; `None`
    /// takes the outer quarter of the window.
    pub plateau_min_delay_ns: Option<f64>,
}

impl Default for G2Options {
    fn default() -> Self {
        Self { bunching: false, plateau_min_delay_ns: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G2Fit {
    pub fit: FitResult,
    pub g2_zero: f64,
    pub g2_zero_sigma: Option<f64>,
    pub antibunching_ns: f64,
    /// (amplitude, time ns) when fitted.
    pub bunching: Option<(f64, f64)>,
    pub plateau_counts: f64,
    /// Fitted g²(0) below 0.5 at 95% one-sided confidence.
    pub single_emitter: bool,
}

/// g²(τ) = 1 − (1 − g0)[(1 + a) e^{−|τ|/τ1} − a e^{−|τ|/τ2}];
/// parameters g0, τ1[, a, τ2].
pub fn g2_model(tau: f64, p: &[f64]) -> f64 {
    let t = tau.abs();
    let (a, t2) = if p.len() >= 4 { (p[2], p[3]) } else { (0.0, 1.0) };
    1.0 - (1.0 - p[0]) * ((1.0 + a) * (-t / p[1]).exp() - a * (-t / t2).exp())
}

/// Bin average of [`g2_model`] over `[center - w/2, center + w/2]`.
fn binned(center: f64, width: f64, p: &[f64]) -> f64 {
    const N: usize = 8;
    (0..N).map(|k| g2_model(center + width * ((k as f64 + 0.5) / N as f64 - 0.5), p)).sum::<f64>() / N as f64
}

pub fn fit_g2(hist: &CoincidenceHistogram, options: &G2Options) -> Result<G2Fit, AnalysisError> {
    let delays = hist.delays_ns();
    let w = hist.bin_width_ns;
    let cut = options.plateau_min_delay_ns.unwrap_or_else(|| hist.default_plateau_delay_ns());
    let plateau: Vec<f64> =
        delays.iter().zip(&hist.counts).filter(|(d, _)| d.abs() >= cut).map(|(_, c)| *c as f64).collect();
    if plateau.is_empty() {
        return Err(AnalysisError::Normalization(format!("no bins beyond |tau| = {cut} ns")));
    }
    let level = plateau.iter().sum::<f64>() / plateau.len() as f64;
    if !(level > 0.0) {
        return Err(AnalysisError::Normalization("plateau holds no coincidences".into()));
    }
    let data: Vec<Sample> = delays
        .iter()
        .zip(&hist.counts)
        .map(|(d, c)| Sample::new(*d, *c as f64 / level, (*c as f64).max(1.0).sqrt() / level))
        .collect();

    // initial guess from the dip: depth at zero, half-depth width
    let mut by_delay: Vec<&Sample> = data.iter().collect();
    by_delay.sort_by(|a, b| a.x.abs().total_cmp(&b.x.abs()));
    let g0 = (by_delay.iter().take(3).map(|s| s.y).sum::<f64>() / 3.0).clamp(0.0, 0.95);
    let half = 0.5 * (1.0 + g0);
    let t_half = by_delay.iter().find(|s| s.y >= half).map(|s| s.x.abs()).unwrap_or(w).max(0.5 * w);
    let tau1 = (t_half / std::f64::consts::LN_2).max(w);
    let guess: Vec<f64> = if options.bunching { vec![g0, tau1, 0.0, 10.0 * tau1] } else { vec![g0, tau1] };

    let fit = match nlls_fit(|x, p| binned(x, w, p), &data, &guess, &FitOptions::default()) {
        Ok(f) => f,
        // no dip to pin the time constant: constant g² only
        Err(AnalysisError::DegenerateFit(_)) => {
            let flat = nlls_fit(|_, p| p[0], &data, &[1.0], &FitOptions::default())?;
            return Ok(G2Fit {
                g2_zero: flat.params[0],
                g2_zero_sigma: flat.sigma(0),
                antibunching_ns: 0.0,
                bunching: None,
                plateau_counts: level,
                single_emitter: false,
                fit: flat,
            });
        }
        Err(e) => return Err(e),
    };
    let g2_zero = fit.params[0];
    let g2_zero_sigma = fit.sigma(0);
    let single_emitter = fit.converged() && g2_zero_sigma.is_some_and(|s| g2_zero + Z95 * s < 0.5);
    Ok(G2Fit {
        g2_zero,
        g2_zero_sigma,
        antibunching_ns: fit.params[1].abs(),
        bunching: options.bunching.then(|| (fit.params[2], fit.params[3].abs())),
        plateau_counts: level,
        single_emitter,
        fit,
    })
}
