//! Raster-scanned photoluminescence maps.

use std::io::{Read, Write};

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::substream;

use super::field::EmitterField;
use super::{OpticsConfig, OpticsError};

/// Axis-aligned window in sample coordinates, µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min_um: f64,
    pub y_min_um: f64,
    pub x_max_um: f64,
    pub y_max_um: f64,
}

impl Region {
    pub fn new(x_min_um: f64, y_min_um: f64, x_max_um: f64, y_max_um: f64) -> Result<Self, OpticsError> {
        let r = Self { x_min_um, y_min_um, x_max_um, y_max_um };
        if !(x_max_um > x_min_um && y_max_um > y_min_um) {
            return Err(OpticsError::Config(format!("empty region {r:?}")));
        }
        Ok(r)
    }

    /// Bounding box of `points` grown by `margin_um`.
    pub fn around(points: impl IntoIterator<Item = (f64, f64)>, margin_um: f64) -> Option<Self> {
        let mut it = points.into_iter().peekable();
        it.peek()?;
        let mut r = Self {
            x_min_um: f64::INFINITY,
            y_min_um: f64::INFINITY,
            x_max_um: f64::NEG_INFINITY,
            y_max_um: f64::NEG_INFINITY,
        };
        for (x, y) in it {
            r.x_min_um = r.x_min_um.min(x);
            r.x_max_um = r.x_max_um.max(x);
            r.y_min_um = r.y_min_um.min(y);
            r.y_max_um = r.y_max_um.max(y);
        }
        Some(r.grown(margin_um))
    }

    pub fn grown(&self, margin_um: f64) -> Self {
        Self {
            x_min_um: self.x_min_um - margin_um,
            y_min_um: self.y_min_um - margin_um,
            x_max_um: self.x_max_um + margin_um,
            y_max_um: self.y_max_um + margin_um,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min_um && x <= self.x_max_um && y >= self.y_min_um && y <= self.y_max_um
    }
}

const MAGIC: &str = "CONFOCAL-MAP v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfocalMap {
    pub nx: usize,
    pub ny: usize,
    pub pixel_size_nm: f64,
    pub dwell_ms: f64,
    /// Lower-left corner of pixel (0, 0), µm.
    pub origin_um: [f64; 2],
    /// Detector full scale; pixels at this value carry no information.
    pub saturation: u32,
    /// Row-major, `y` slowest.
    pub counts: Vec<u32>,
    pub provenance: String,
}

impl ConfocalMap {
    pub fn new(nx: usize, ny: usize, pixel_size_nm: f64, dwell_ms: f64, origin_um: [f64; 2], counts: Vec<u32>) -> Result<Self, OpticsError> {
        if nx == 0 || ny == 0 || counts.len() != nx * ny {
            return Err(OpticsError::Format(format!("{} counts for a {nx}x{ny} map", counts.len())));
        }
        if !(pixel_size_nm > 0.0 && dwell_ms > 0.0) {
            return Err(OpticsError::Format("pixel size and dwell must be positive".into()));
        }
        Ok(Self { nx, ny, pixel_size_nm, dwell_ms, origin_um, saturation: u32::MAX, counts, provenance: String::new() })
    }

    pub fn pixel_um(&self) -> f64 {
        self.pixel_size_nm * 1e-3
    }

    pub fn get(&self, ix: usize, iy: usize) -> u32 {
        self.counts[iy * self.nx + ix]
    }

    /// Center of pixel (ix, iy), µm.
    pub fn pixel_center_um(&self, ix: f64, iy: f64) -> (f64, f64) {
        let p = self.pixel_um();
        (self.origin_um[0] + (ix + 0.5) * p, self.origin_um[1] + (iy + 0.5) * p)
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), OpticsError> {
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "nx={}", self.nx)?;
        writeln!(out, "ny={}", self.ny)?;
        writeln!(out, "pixel_size_nm={}", self.pixel_size_nm)?;
        writeln!(out, "dwell_ms={}", self.dwell_ms)?;
        writeln!(out, "origin_x_um={}", self.origin_um[0])?;
        writeln!(out, "origin_y_um={}", self.origin_um[1])?;
        writeln!(out, "saturation={}", self.saturation)?;
        writeln!(out, "provenance={}", self.provenance.replace('\n', " "))?;
        writeln!(out, "---")?;
        let mut buf = Vec::with_capacity(4 * self.counts.len());
        for c in &self.counts {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, OpticsError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let sep = b"\n---\n";
        let split = bytes
            .windows(sep.len())
            .position(|w| w == sep)
            .ok_or_else(|| OpticsError::Format("missing header separator".into()))?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|e| OpticsError::Format(e.to_string()))?;
        let data = &bytes[split + sep.len()..];
        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(OpticsError::Format("not a confocal map file".into()));
        }
        let mut kv = std::collections::HashMap::new();
        for l in lines {
            let (k, v) = l.split_once('=').ok_or_else(|| OpticsError::Format(format!("bad header line `{l}`")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let field = |k: &str| kv.get(k).ok_or_else(|| OpticsError::Format(format!("header lacks `{k}`")));
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T, OpticsError> {
            v.parse().map_err(|_| OpticsError::Format(format!("bad value for `{k}`: {v}")))
        }
        let nx: usize = num("nx", field("nx")?)?;
        let ny: usize = num("ny", field("ny")?)?;
        if data.len() != 4 * nx * ny {
            return Err(OpticsError::Format(format!("expected {} data bytes, found {}", 4 * nx * ny, data.len())));
        }
        let counts = data.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let mut map = Self::new(
            nx,
            ny,
            num("pixel_size_nm", field("pixel_size_nm")?)?,
            num("dwell_ms", field("dwell_ms")?)?,
            [num("origin_x_um", field("origin_x_um")?)?, num("origin_y_um", field("origin_y_um")?)?],
            counts,
        )?;
        map.saturation = num("saturation", field("saturation")?)?;
        map.provenance = kv.get("provenance").cloned().unwrap_or_default();
        Ok(map)
    }

    /// `x_um,y_um,counts` per pixel.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x_um,y_um,counts")?;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let (x, y) = self.pixel_center_um(ix as f64, iy as f64);
                writeln!(out, "{x:.4},{y:.4},{}", self.get(ix, iy))?;
            }
        }
        Ok(())
    }
}

/// Pixel grid of a map over `region`.
fn grid(optics: &OpticsConfig, region: &Region) -> Result<(usize, usize), OpticsError> {
    optics.validate()?;
    let p = optics.pixel_size_nm * 1e-3;
    let nx = ((region.x_max_um - region.x_min_um) / p).ceil().max(1.0) as usize;
    let ny = ((region.y_max_um - region.y_min_um) / p).ceil().max(1.0) as usize;
    if nx.saturating_mul(ny) > 200_000_000 {
        return Err(OpticsError::Config(format!("{nx}x{ny} pixels is too large a map")));
    }
    Ok((nx, ny))
}

/// Expected counts per pixel (row-major) before shot noise: every emitter
/// through a Gaussian PSF plus the uniform background, times the dwell.
pub fn expected_counts(field: &EmitterField, optics: &OpticsConfig, region: &Region) -> Result<Vec<f64>, OpticsError> {
    let (nx, ny) = grid(optics, region)?;
    Ok(expected_rows(field, optics, region, nx, ny).concat())
}

fn expected_rows(field: &EmitterField, optics: &OpticsConfig, region: &Region, nx: usize, ny: usize) -> Vec<Vec<f64>> {
    let p = optics.pixel_size_nm * 1e-3;
    let dwell_s = optics.dwell_ms * 1e-3;
    let sigma = optics.psf_sigma_um();
    let reach = 5.0 * sigma;
    let inv2s2 = 0.5 / (sigma * sigma);
    let [x0, y0] = [region.x_min_um, region.y_min_um];

    // emitters bucketed by the rows they reach
    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); ny];
    for (k, e) in field.emitters.iter().enumerate() {
        let lo = ((e.y_um - reach - y0) / p).floor().max(0.0) as usize;
        let hi = ((e.y_um + reach - y0) / p).ceil();
        if hi < 0.0 || lo >= ny {
            continue;
        }
        for row in by_row.iter_mut().take((hi as usize).min(ny - 1) + 1).skip(lo) {
            row.push(k);
        }
    }

    (0..ny)
        .into_par_iter()
        .map(|iy| {
            let yc = y0 + (iy as f64 + 0.5) * p;
            let mut expected = vec![optics.background_cps * dwell_s; nx];
            for &k in &by_row[iy] {
                let e = &field.emitters[k];
                let amp = e.brightness_cps * dwell_s * (-(e.y_um - yc).powi(2) * inv2s2).exp();
                if amp <= 0.0 {
                    continue;
                }
                let lo = ((e.x_um - reach - x0) / p).floor().max(0.0) as usize;
                let hi = ((e.x_um + reach - x0) / p).ceil();
                if hi < 0.0 || lo >= nx {
                    continue;
                }
                for (ix, v) in expected.iter_mut().enumerate().take((hi as usize).min(nx - 1) + 1).skip(lo) {
                    let xc = x0 + (ix as f64 + 0.5) * p;
                    *v += amp * (-(e.x_um - xc).powi(2) * inv2s2).exp();
                }
            }
            expected
        })
        .collect()
}

/// Renders `field` through a Gaussian PSF over `region` and draws Poisson
/// counts per pixel. Each row has its own random stream.
pub fn synthesize_confocal_map(
    field: &EmitterField,
    optics: &OpticsConfig,
    region: &Region,
    seed: u64,
) -> Result<ConfocalMap, OpticsError> {
    let (nx, ny) = grid(optics, region)?;
    let rows: Vec<Vec<u32>> = expected_rows(field, optics, region, nx, ny)
        .into_par_iter()
        .enumerate()
        .map(|(iy, expected)| {
            let mut rng = substream(seed, iy as u64);
            expected
                .into_iter()
                .map(|lambda| {
                    if lambda <= 0.0 {
                        0
                    } else {
                        let c: f64 = Poisson::new(lambda).map(|d| d.sample(&mut rng)).unwrap_or(0.0);
                        c.min(u32::MAX as f64) as u32
                    }
                })
                .collect()
        })
        .collect();

    let origin = [region.x_min_um, region.y_min_um];
    let mut map = ConfocalMap::new(nx, ny, optics.pixel_size_nm, optics.dwell_ms, origin, rows.concat())?;
    map.provenance = format!("synthetic, seed={seed}, emitters={}", field.len());
    Ok(map)
}
