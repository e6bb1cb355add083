//! Hanbury Brown and Twiss photon-correlation measurement.
//!
//! Each emitter cycles ground → excited (rate `excitation`) → ground
//! (rate 1/lifetime), optionally detouring through a dark shelf. A detected
//! photon is a Bernoulli-thinned emission, so the gap between two detected
//! photons of one emitter is the sum of a geometric number of cycles. That
//! sum is drawn directly from Gamma distributions, giving an exact sampler
//! whose cost scales with detected rather than emitted photons.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric};
use serde::{Deserialize, Serialize};

use crate::rng::{substream, StreamRng};

use super::OpticsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shelving {
    /// Probability that an emission cycle passes through the shelf.
    pub probability: f64,
    pub lifetime_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Photophysics {
    pub lifetime_ns: f64,
    /// Pump rate out of the ground state, 1/ns.
    pub excitation_per_ns: f64,
    pub detection_efficiency: f64,
    pub shelving: Option<Shelving>,
}

impl Default for Photophysics {
    fn default() -> Self {
        Self { lifetime_ns: 1.7, excitation_per_ns: 0.2, detection_efficiency: 0.0012, shelving: None }
    }
}

impl Photophysics {
    fn validate(&self) -> Result<(), OpticsError> {
        let ok = self.lifetime_ns > 0.0
            && self.excitation_per_ns > 0.0
            && self.detection_efficiency > 0.0
            && self.detection_efficiency <= 1.0
            && self.shelving.map_or(true, |s| (0.0..1.0).contains(&s.probability) && s.lifetime_ns > 0.0);
        if ok {
            Ok(())
        } else {
            Err(OpticsError::Config(format!("invalid photophysics {self:?}")))
        }
    }

    /// Mean detected rate of one emitter, counts/s.
    pub fn detected_rate_cps(&self) -> f64 {
        let shelf = self.shelving.map_or(0.0, |s| s.probability * s.lifetime_ns);
        self.detection_efficiency / (1.0 / self.excitation_per_ns + self.lifetime_ns + shelf) * 1e9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HbtConfig {
    pub photophysics: Photophysics,
    pub bin_width_ns: f64,
    /// Histogram covers delays in [-window, window].
    pub window_ns: f64,
    pub acquisition_s: f64,
    /// Uncorrelated detector background per channel, counts/s.
    pub dark_cps: f64,
}

impl Default for HbtConfig {
    fn default() -> Self {
        Self { photophysics: Photophysics::default(), bin_width_ns: 0.2, window_ns: 60.0, acquisition_s: 60.0, dark_cps: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ns: f64,
    /// Bin `i` is centered at `(i - (len - 1) / 2) · bin_width_ns`.
    pub counts: Vec<u64>,
    pub singles: [f64; 2],
    pub acquisition_s: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl CoincidenceHistogram {
    /// An odd number of bins keeps zero delay centered in the middle bin.
    pub fn from_counts(bin_width_ns: f64, counts: Vec<u64>, singles: [f64; 2], acquisition_s: f64) -> Self {
        Self { bin_width_ns, counts, singles, acquisition_s, warnings: Vec::new() }
    }

    /// Mean counts of the bins at |τ| ≥ `min_delay_ns`, if any.
    pub fn plateau_level(&self, min_delay_ns: f64) -> Option<f64> {
        let bins: Vec<f64> = self
            .delays_ns()
            .iter()
            .zip(&self.counts)
            .filter(|(d, _)| d.abs() >= min_delay_ns)
            .map(|(_, c)| *c as f64)
            .collect();
        (!bins.is_empty()).then(|| bins.iter().sum::<f64>() / bins.len() as f64)
    }

    /// Default plateau: the outer quarter of the delay window.
    pub fn default_plateau_delay_ns(&self) -> f64 {
        0.75 * (self.counts.len() as f64 - 1.0) / 2.0 * self.bin_width_ns
    }

    pub fn delays_ns(&self) -> Vec<f64> {
        let mid = (self.counts.len() as f64 - 1.0) / 2.0;
        (0..self.counts.len()).map(|i| (i as f64 - mid) * self.bin_width_ns).collect()
    }

    /// Coincidences expected per bin from uncorrelated channels.
    pub fn accidental_level(&self) -> f64 {
        self.singles[0] * self.singles[1] * self.bin_width_ns * 1e-9 * self.acquisition_s
    }

    /// `delay_ns,counts,g2_normalized`, normalized by the large-delay plateau.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let level = self.plateau_level(self.default_plateau_delay_ns()).unwrap_or(0.0);
        writeln!(out, "delay_ns,counts,g2_normalized")?;
        for (d, c) in self.delays_ns().iter().zip(&self.counts) {
            let g = if level > 0.0 { *c as f64 / level } else { f64::NAN };
            writeln!(out, "{d:.4},{c},{g:.6}")?;
        }
        Ok(())
    }
}

/// Photon arrival stream of one emitter, delivering (time ns, channel).
struct PhotonSource {
    rng: StreamRng,
    cycles: Geometric,
    excite: f64,
    decay: f64,
    shelf: Option<Shelving>,
    t: f64,
}

fn gamma_sum<R: Rng>(n: u64, rate: f64, rng: &mut R) -> f64 {
    if n == 0 {
        0.0
    } else {
        Gamma::new(n as f64, 1.0 / rate).map(|g| g.sample(rng)).unwrap_or(n as f64 / rate)
    }
}

impl PhotonSource {
    fn next(&mut self) -> (f64, u8) {
        let n = 1 + self.cycles.sample(&mut self.rng);
        let mut dt = gamma_sum(n, self.excite, &mut self.rng) + gamma_sum(n, self.decay, &mut self.rng);
        if let Some(s) = self.shelf {
            let m = Binomial::new(n, s.probability).map(|b| b.sample(&mut self.rng)).unwrap_or(0);
            dt += gamma_sum(m, 1.0 / s.lifetime_ns, &mut self.rng);
        }
        self.t += dt;
        (self.t, self.rng.gen_range(0..2u8))
    }
}

/// Poisson dark counts on one channel.
struct DarkSource {
    rng: StreamRng,
    rate_per_ns: f64,
    channel: u8,
    t: f64,
}

impl DarkSource {
    fn next(&mut self) -> (f64, u8) {
        self.t += -(1.0 - self.rng.gen::<f64>()).ln() / self.rate_per_ns;
        (self.t, self.channel)
    }
}

enum Source {
    Emitter(PhotonSource),
    Dark(DarkSource),
}

impl Source {
    fn next(&mut self) -> (f64, u8) {
        match self {
            Source::Emitter(s) => s.next(),
            Source::Dark(s) => s.next(),
        }
    }
}

#[derive(PartialEq, PartialOrd)]
struct Time(f64);
impl Eq for Time {}
impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Simulates `n_emitters` identical emitters behind a 50/50 beam splitter
/// and histograms every channel-0/channel-1 photon pair within the window;
/// delay is t(channel 1) − t(channel 0).
pub fn simulate_hbt(n_emitters: usize, config: &HbtConfig, seed: u64) -> Result<CoincidenceHistogram, OpticsError> {
    let ph = config.photophysics;
    ph.validate()?;
    if n_emitters == 0 {
        return Err(OpticsError::Config("at least one emitter is required".into()));
    }
    if !(config.bin_width_ns > 0.0 && config.window_ns > config.bin_width_ns && config.acquisition_s > 0.0 && config.dark_cps >= 0.0) {
        return Err(OpticsError::Config(format!("invalid HBT configuration {config:?}")));
    }
    let half_bins = (config.window_ns / config.bin_width_ns).round() as usize;
    let window = half_bins as f64 * config.bin_width_ns;
    let mut counts = vec![0u64; 2 * half_bins + 1];
    let duration_ns = config.acquisition_s * 1e9;
    let cycles = Geometric::new(ph.detection_efficiency).map_err(|e| OpticsError::Config(e.to_string()))?;

    let mut sources: Vec<Source> = (0..n_emitters)
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            // start in steady state: random phase within the first gap
            let mut s = PhotonSource {
                t: 0.0,
                excite: ph.excitation_per_ns,
                decay: 1.0 / ph.lifetime_ns,
                shelf: ph.shelving,
                cycles,
                rng: substream(seed, u64::MAX - k as u64),
            };
            s.t = -s.next().0 * rng.gen::<f64>();
            Source::Emitter(s)
        })
        .collect();
    if config.dark_cps > 0.0 {
        for ch in 0..2u8 {
            sources.push(Source::Dark(DarkSource {
                rng: substream(seed ^ 0xDA2C, ch as u64),
                rate_per_ns: config.dark_cps * 1e-9,
                channel: ch,
                t: 0.0,
            }));
        }
    }

    let mut heap = BinaryHeap::new();
    for (k, s) in sources.iter_mut().enumerate() {
        let (t, c) = s.next();
        heap.push(Reverse((Time(t), k, c)));
    }
    let mut recent: VecDeque<(f64, u8)> = VecDeque::new();
    let mut singles = [0u64; 2];
    while let Some(Reverse((Time(t), k, ch))) = heap.pop() {
        if t > duration_ns {
            break;
        }
        let next = sources[k].next();
        heap.push(Reverse((Time(next.0), k, next.1)));
        if t < 0.0 {
            continue;
        }
        singles[ch as usize] += 1;
        while recent.front().is_some_and(|(t0, _)| t - t0 > window) {
            recent.pop_front();
        }
        for &(t0, ch0) in &recent {
            if ch0 == ch {
                continue;
            }
            let delay = if ch == 1 { t - t0 } else { t0 - t };
            let idx = (delay / config.bin_width_ns).round() as i64 + half_bins as i64;
            if (0..counts.len() as i64).contains(&idx) {
                counts[idx as usize] += 1;
            }
        }
        recent.push_back((t, ch));
    }
    let singles = [singles[0] as f64 / config.acquisition_s, singles[1] as f64 / config.acquisition_s];
    let mut hist = CoincidenceHistogram::from_counts(config.bin_width_ns, counts, singles, config.acquisition_s);
    if hist.counts.iter().all(|c| *c == 0) {
        hist.warnings.push("no coincidences recorded: emission or detection rates too low for this acquisition".into());
    }
    Ok(hist)
}
