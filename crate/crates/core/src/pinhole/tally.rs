//! Sample-plane impact records, histograms and derived profiles.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::PinholeError;

pub const DIRECT_BIN_NM: f64 = 50.0;
pub const DEFAULT_SCATTERED_BIN_UM: f64 = 5.0;
/// Radial profiles always reach at least this radius.
pub const PROFILE_MIN_EXTENT_UM: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImpactKind {
    Direct,
    Scattered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impact {
    pub x_um: f64,
    pub y_um: f64,
    pub energy_ev: f64,
    pub kind: ImpactKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub launched: u64,
    pub direct: u64,
    pub scattered: u64,
    /// Stopped inside the foil (including analytically range-rejected histories).
    pub stopped_in_wall: u64,
    /// Never reach the sample: entered where the foil is provably opaque,
    /// or left the foil on the upstream side.
    pub blocked: u64,
}

impl Counters {
    pub fn is_conserved(&self) -> bool {
        self.launched == self.direct + self.scattered + self.stopped_in_wall + self.blocked
    }
}

/// Square 2-D histogram of direct impacts centred on the beam axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectHistogram {
    pub bin_um: f64,
    pub bins_per_side: usize,
    /// Row-major, y outer.
    pub counts: Vec<u64>,
}

impl DirectHistogram {
    fn build(impacts: &[Impact], bin_um: f64) -> Self {
        let extent = impacts
            .iter()
            .filter(|i| i.kind == ImpactKind::Direct)
            .map(|i| i.x_um.abs().max(i.y_um.abs()))
            .fold(1.0f64, f64::max);
        let half_bins = (extent / bin_um).floor() as usize + 1;
        let n = 2 * half_bins;
        let mut counts = vec![0; n * n];
        let half = half_bins as f64 * bin_um;
        for imp in impacts.iter().filter(|i| i.kind == ImpactKind::Direct) {
            let ix = (((imp.x_um + half) / bin_um) as usize).min(n - 1);
            let iy = (((imp.y_um + half) / bin_um) as usize).min(n - 1);
            counts[iy * n + ix] += 1;
        }
        Self { bin_um, bins_per_side: n, counts }
    }

    pub fn half_width_um(&self) -> f64 {
        0.5 * self.bins_per_side as f64 * self.bin_um
    }

    /// Bin centre of column/row index.
    pub fn center_um(&self, index: usize) -> f64 {
        (index as f64 + 0.5) * self.bin_um - self.half_width_um()
    }

    /// Peak density in ions/µm²: the highest 3×3-bin average, which keeps
    /// single-bin Poisson fluctuations from setting the normalization.
    pub fn peak_density(&self) -> f64 {
        let n = self.bins_per_side as isize;
        let at = |x: isize, y: isize| {
            if x < 0 || y < 0 || x >= n || y >= n {
                0
            } else {
                self.counts[(y * n + x) as usize]
            }
        };
        let mut best = 0;
        for y in 0..n {
            for x in 0..n {
                let sum: u64 = (-1..=1).flat_map(|dy| (-1..=1).map(move |dx| (dx, dy))).map(|(dx, dy)| at(x + dx, y + dy)).sum();
                best = best.max(sum);
            }
        }
        best as f64 / (9.0 * self.bin_um * self.bin_um)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x_um,y_um,counts")?;
        let n = self.bins_per_side;
        for iy in 0..n {
            for ix in 0..n {
                writeln!(out, "{:.4},{:.4},{}", self.center_um(ix), self.center_um(iy), self.counts[iy * n + ix])?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlaneTally {
    pub distance_mm: f64,
    pub beam_energy_ev: f64,
    pub counters: Counters,
    pub impacts: Vec<Impact>,
    pub scattered_bin_um: f64,
    /// Scattered ions per annulus of width `scattered_bin_um` around the axis.
    pub scattered_radial: Vec<u64>,
    pub direct_histogram: DirectHistogram,
    pub warnings: Vec<String>,
}

impl SamplePlaneTally {
    /// Tally from impact records; `stopped_in_wall` and `blocked` are
    /// histories without an impact.
    pub fn from_impacts(
        distance_mm: f64,
        beam_energy_ev: f64,
        impacts: Vec<Impact>,
        stopped_in_wall: u64,
        blocked: u64,
        scattered_bin_um: f64,
    ) -> Self {
        let direct = impacts.iter().filter(|i| i.kind == ImpactKind::Direct).count() as u64;
        let scattered = impacts.len() as u64 - direct;
        let counters = Counters {
            launched: direct + scattered + stopped_in_wall + blocked,
            direct,
            scattered,
            stopped_in_wall,
            blocked,
        };
        let scattered_radial = radial_counts(&impacts, scattered_bin_um);
        let direct_histogram = DirectHistogram::build(&impacts, DIRECT_BIN_NM * 1e-3);
        Self {
            distance_mm,
            beam_energy_ev,
            counters,
            impacts,
            scattered_bin_um,
            scattered_radial,
            direct_histogram,
            warnings: Vec::new(),
        }
    }

    /// Full width at half maximum of the direct spot (µm), from the
    /// azimuthally averaged density of direct impacts around their centroid.
    pub fn direct_spot_fwhm_um(&self) -> Option<f64> {
        let direct: Vec<_> = self.impacts.iter().filter(|i| i.kind == ImpactKind::Direct).collect();
        if direct.len() < 100 {
            return None;
        }
        let n = direct.len() as f64;
        let cx = direct.iter().map(|i| i.x_um).sum::<f64>() / n;
        let cy = direct.iter().map(|i| i.y_um).sum::<f64>() / n;
        let w = 0.02;
        let mut counts = vec![0u64; 400];
        for i in &direct {
            let k = ((i.x_um - cx).hypot(i.y_um - cy) / w) as usize;
            if k < counts.len() {
                counts[k] += 1;
            }
        }
        let density: Vec<f64> = counts
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 / (PI * w * w * ((k + 1).pow(2) - k.pow(2)) as f64))
            .collect();
        // central level from the innermost 0.2 µm disk
        // central density from density ≈ c0 + c1·r² over the inner bins
        let inner = (0.25 / w) as usize;
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, d) in density[..inner].iter().enumerate() {
            // ring area weights, i.e. ∝ expected counts
            let wt = ((k + 1).pow(2) - k.pow(2)) as f64;
            let u = ((k as f64 + 0.5) * w).powi(2);
            s0 += wt;
            s1 += wt * u;
            s2 += wt * u * u;
            t0 += wt * d;
            t1 += wt * d * u;
        }
        let det = s0 * s2 - s1 * s1;
        let central = if det > 0.0 { (t0 * s2 - t1 * s1) / det } else { t0 / s0 };
        let half = 0.5 * central;
        // last crossing, smoothed over three bins
        let smooth: Vec<f64> = (0..density.len())
            .map(|k| {
                let lo = k.saturating_sub(1);
                let hi = (k + 2).min(density.len());
                density[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            })
            .collect();
        let k = (inner..smooth.len() - 1).rev().find(|&k| smooth[k] >= half)?;
        let (r0, r1) = ((k as f64 + 0.5) * w, (k as f64 + 1.5) * w);
        let t = (smooth[k] - half) / (smooth[k] - smooth[k + 1]).max(1e-300);
        Some(2.0 * (r0 + t.clamp(0.0, 1.0) * (r1 - r0)))
    }
}

fn radial_counts(impacts: &[Impact], bin_um: f64) -> Vec<u64> {
    let mut bins: Vec<u64> = Vec::new();
    for i in impacts.iter().filter(|i| i.kind == ImpactKind::Scattered) {
        let k = (i.x_um.hypot(i.y_um) / bin_um) as usize;
        if k >= bins.len() {
            bins.resize(k + 1, 0);
        }
        bins[k] += 1;
    }
    bins
}

/// Total scattered over total direct ions.
pub fn scattered_to_direct_ratio(tally: &SamplePlaneTally) -> Result<f64, PinholeError> {
    if tally.counters.direct == 0 {
        return Err(PinholeError::UndefinedRatio);
    }
    Ok(tally.counters.scattered as f64 / tally.counters.direct as f64)
}

/// `(radius_um, density)` at annulus centres, density = scattered ions per
/// µm² divided by the peak direct-spot density. Empty when the tally has
/// no direct ions to normalize against.
/// One annulus of the scattered-ion radial profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileBin {
    pub radius_um: f64,
    /// Areal density relative to the peak direct-spot density.
    pub relative_density: f64,
    pub counts: u64,
}

impl ProfileBin {
    /// Poisson standard error of `relative_density`; zero for an empty bin.
    pub fn sigma(&self) -> f64 {
        if self.counts == 0 {
            return 0.0;
        }
        self.relative_density / (self.counts as f64).sqrt()
    }
}

pub fn radial_density_profile(tally: &SamplePlaneTally, bin_width_um: f64) -> Result<Vec<ProfileBin>, PinholeError> {
    if !(bin_width_um > 0.0) {
        return Err(PinholeError::Config(format!("bin width must be > 0, got {bin_width_um}")));
    }
    let peak = tally.direct_histogram.peak_density();
    if peak <= 0.0 {
        return Ok(Vec::new());
    }
    let mut counts = radial_counts(&tally.impacts, bin_width_um);
    let min_bins = (PROFILE_MIN_EXTENT_UM / bin_width_um).ceil() as usize;
    if counts.len() < min_bins {
        counts.resize(min_bins, 0);
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let (r0, r1) = (k as f64 * bin_width_um, (k + 1) as f64 * bin_width_um);
            let area = PI * (r1 * r1 - r0 * r0);
            ProfileBin { radius_um: 0.5 * (r0 + r1), relative_density: c as f64 / area / peak, counts: c }
        })
        .collect())
}

pub fn write_profile_csv<W: Write>(profile: &[ProfileBin], mut out: W) -> std::io::Result<()> {
    writeln!(out, "radius_um,relative_density")?;
    for b in profile {
        writeln!(out, "{:.3},{:.6e}", b.radius_um, b.relative_density)?;
    }
    Ok(())
}
