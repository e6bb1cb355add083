//! Zero-phonon-line fit: one Lorentzian on a constant baseline.

use serde::{Deserialize, Serialize};

use super::fit::{nlls_fit, FitOptions, FitResult, Sample};
use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    wavelengths_nm: Vec<f64>,
    intensity: Vec<f64>,
}

impl Spectrum {
    pub fn new(wavelengths_nm: Vec<f64>, intensity: Vec<f64>) -> Result<Self, AnalysisError> {
        if wavelengths_nm.len() != intensity.len() || wavelengths_nm.len() < 5 {
            return Err(AnalysisError::InvalidInput("spectrum needs >= 5 (wavelength, intensity) pairs".into()));
        }
        if wavelengths_nm.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(AnalysisError::InvalidInput("wavelengths must be strictly increasing".into()));
        }
        if intensity.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::InvalidInput("intensities must be finite".into()));
        }
        Ok(Self { wavelengths_nm, intensity })
    }

    /// Reads `wavelength_nm,counts` CSV (header optional).
    pub fn from_csv(text: &str) -> Result<Self, AnalysisError> {
        let mut w = Vec::new();
        let mut v = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let (a, b) = (parts.next(), parts.next());
            match (a.and_then(|s| s.trim().parse::<f64>().ok()), b.and_then(|s| s.trim().parse::<f64>().ok())) {
                (Some(x), Some(y)) => {
                    w.push(x);
                    v.push(y);
                }
                _ if i == 0 => continue,
                _ => return Err(AnalysisError::InvalidInput(format!("bad spectrum line {}: `{line}`", i + 1))),
            }
        }
        Self::new(w, v)
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }
}

/// Baseline + amplitude / (1 + ((λ - center) / half width)²);
/// parameters: center, FWHM, amplitude, baseline.
pub fn lorentzian(x: f64, p: &[f64]) -> f64 {
    let u = (x - p[0]) / (0.5 * p[1]);
    p[3] + p[2] / (1.0 + u * u)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZplFit {
    pub fit: FitResult,
    pub center_nm: f64,
    pub center_sigma_nm: Option<f64>,
    pub fwhm_nm: f64,
    pub amplitude: f64,
    pub baseline: f64,
    /// Peak over baseline, (amplitude + baseline) / baseline.
    pub contrast: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ZplOutcome {
    Line(ZplFit),
    NoLine { peak_excess: f64, noise: f64 },
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Point-to-point noise from the median absolute first difference.
fn noise_level(y: &[f64]) -> f64 {
    let mut d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    1.4826 * median(&mut d) / std::f64::consts::SQRT_2
}

fn smoothed(y: &[f64], half: usize) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(y.len());
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

pub fn fit_lorentzian_zpl(spec: &Spectrum) -> Result<ZplOutcome, AnalysisError> {
    let x = spec.wavelengths_nm();
    let y = spec.intensity();
    let noise = noise_level(y).max(1e-12 * y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let base0 = median(&mut y.to_vec());
    let smooth = smoothed(y, 2);
    let (imax, peak) = smooth.iter().enumerate().fold((0, f64::MIN), |m, (i, v)| if *v > m.1 { (i, *v) } else { m });
    let excess = peak - base0;
    if !(excess > 2.0 * noise) {
        return Ok(ZplOutcome::NoLine { peak_excess: excess, noise });
    }
    let half = base0 + 0.5 * (y[imax] - base0);
    let left = (0..imax).rev().find(|&i| y[i] < half).unwrap_or(0);
    let right = (imax..y.len()).find(|&i| y[i] < half).unwrap_or(y.len() - 1);
    let spacing = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let fwhm0 = (x[right] - x[left]).max(2.0 * spacing);
    let sigma = noise.max(1e-300);
    let data: Vec<Sample> = x.iter().zip(y).map(|(a, b)| Sample::new(*a, *b, sigma)).collect();
    let fit = nlls_fit(lorentzian, &data, &[x[imax], fwhm0, y[imax] - base0, base0], &FitOptions::default())?;
    let [center, fwhm, amp, base] = [fit.params[0], fit.params[1].abs(), fit.params[2], fit.params[3]];
    let mut warnings = Vec::new();
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - lorentzian(*a, &fit.params)).collect();
    let rmax = smoothed(&resid, 2).into_iter().fold(f64::MIN, f64::max);
    if rmax > 2.0 * noise {
        warnings.push(format!("residual excess {rmax:.3} above 2x noise {noise:.3}: possible secondary line"));
    }
    if !fit.converged() {
        warnings.push("line fit did not converge".into());
    }
    Ok(ZplOutcome::Line(ZplFit {
        center_nm: center,
        center_sigma_nm: fit.sigma(0),
        fwhm_nm: fwhm,
        amplitude: amp,
        baseline: base,
        contrast: if base > 0.0 { (amp + base) / base } else { f64::INFINITY },
        warnings,
        fit,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn grid() -> Vec<f64> {
        (0..400).map(|i| 725.0 + i as f64 * 0.0625).collect()
    }

    fn noisy(f: impl Fn(f64) -> f64, rel: f64, seed: u64) -> Spectrum {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w = grid();
        let y = w.iter().map(|x| f(*x) + Normal::new(0.0, rel).unwrap().sample(&mut rng)).collect();
        Spectrum::new(w, y).unwrap()
    }

    #[test]
    fn siv_line_center_and_contrast() {
        let s = noisy(|x| lorentzian(x, &[738.0, 1.2, 450.0, 100.0]), 5.0, 3);
        let ZplOutcome::Line(f) = fit_lorentzian_zpl(&s).unwrap() else { panic!("line expected") };
        let sc = f.center_sigma_nm.unwrap();
        assert!((f.center_nm - 738.0).abs() < 3.0 * sc, "{} ± {sc}", f.center_nm);
        assert!(f.contrast > 5.0 && f.contrast < 6.0, "{}", f.contrast);
        assert!(f.warnings.is_empty(), "{:?}", f.warnings);
    }

    #[test]
    fn flat_spectrum_has_no_line() {
        let s = noisy(|_| 100.0, 5.0, 9);
        assert!(matches!(fit_lorentzian_zpl(&s).unwrap(), ZplOutcome::NoLine { .. }));
    }

    #[test]
    fn secondary_line_warns() {
        let s = noisy(|x| lorentzian(x, &[738.0, 1.0, 500.0, 100.0]) + lorentzian(x, &[745.0, 1.0, 150.0, 0.0]), 5.0, 2);
        let ZplOutcome::Line(f) = fit_lorentzian_zpl(&s).unwrap() else { panic!() };
        assert!((f.center_nm - 738.0).abs() < 0.1);
        assert!(!f.warnings.is_empty());
    }

    #[test]
    fn validation_and_csv() {
        assert!(Spectrum::new(vec![1.0, 1.0, 2.0, 3.0, 4.0], vec![0.0; 5]).is_err());
        let s = Spectrum::from_csv("wavelength_nm,counts\n1,2\n2,3\n3,4\n4,5\n5,6\n").unwrap();
        assert_eq!(s.intensity()[4], 6.0);
    }
}
