//! Stopping powers, CSDA range and tabulated range lookups.

use std::io::Write;

use super::material::{IonSpecies, TargetMaterial};
use super::zbl;
use super::{StoppingError, StoppingModel, PROJECTED_RANGE_RATIO};

/// Lindhard-Scharff coefficient k with S_e = k·sqrt(E), in eV^(1/2)·nm² per atom.
pub fn lindhard_scharff_coefficient(z1: u32, m1: f64, z2: u32) -> f64 {
    let (z1, z2) = (z1 as f64, z2 as f64);
    // 1.212 eV^(1/2) Å² -> nm²
    0.01212 * z1.powf(7.0 / 6.0) * z2
        / ((z1.powf(2.0 / 3.0) + z2.powf(2.0 / 3.0)).powf(1.5) * m1.sqrt())
}

impl StoppingModel {
    /// Composition-weighted S_e/sqrt(E) for this ion in `mat`, eV^(1/2)/nm.
    pub fn electronic_slope(&self, ion: &IonSpecies, mat: &TargetMaterial) -> f64 {
        let n = mat.atomic_density_nm3();
        let k: f64 = mat
            .components()
            .iter()
            .map(|c| c.fraction * lindhard_scharff_coefficient(ion.atomic_number(), ion.mass_u(), c.atomic_number))
            .sum();
        self.electronic_correction * k * n
    }

    /// Electronic stopping power, eV/nm.
    pub fn electronic_stopping(
        &self,
        ion: &IonSpecies,
        mat: &TargetMaterial,
        energy_ev: f64,
    ) -> Result<f64, StoppingError> {
        check_energy(energy_ev)?;
        Ok(self.electronic_slope(ion, mat) * energy_ev.sqrt())
    }

    /// ZBL universal nuclear stopping power, eV/nm.
    pub fn nuclear_stopping(
        &self,
        ion: &IonSpecies,
        mat: &TargetMaterial,
        energy_ev: f64,
    ) -> Result<f64, StoppingError> {
        check_energy(energy_ev)?;
        let n = mat.atomic_density_nm3();
        Ok(n * mat
            .components()
            .iter()
            .map(|c| {
                c.fraction
                    * zbl::nuclear_stopping_cross_section(
                        ion.atomic_number(),
                        ion.mass_u(),
                        c.atomic_number,
                        c.mass_u,
                        energy_ev,
                    )
            })
            .sum::<f64>())
    }

    /// Projected range (nm): path-length integral of 1/(S_e + S_n) from zero
    /// to `energy_ev`, times [`PROJECTED_RANGE_RATIO`].
    pub fn csda_range(
        &self,
        ion: &IonSpecies,
        mat: &TargetMaterial,
        energy_ev: f64,
    ) -> Result<f64, StoppingError> {
        check_energy(energy_ev)?;
        let k = self.electronic_slope(ion, mat);
        let path = integrate_sqrt(energy_ev, |e| {
            k * e.sqrt() + self.nuclear_stopping(ion, mat, e).unwrap()
        });
        Ok(PROJECTED_RANGE_RATIO * path)
    }
}

fn check_energy(energy_ev: f64) -> Result<(), StoppingError> {
    if energy_ev >= 0.0 && energy_ev.is_finite() {
        Ok(())
    } else {
        Err(StoppingError::NegativeEnergy(energy_ev))
    }
}

/// ∫₀^E dE'/S(E') with E' = u²; the integrand 2u/S(u²) stays finite at 0 for
/// any S growing like sqrt(E).
fn integrate_sqrt(energy_ev: f64, stopping: impl Fn(f64) -> f64) -> f64 {
    if energy_ev <= 0.0 {
        return 0.0;
    }
    let top = energy_ev.sqrt();
    let f = |u: f64| {
        if u == 0.0 {
            // limit 2u / (k u + o(u)); evaluated just above zero instead
            let h = top * 1e-9;
            2.0 * h / stopping(h * h)
        } else {
            2.0 * u / stopping(u * u)
        }
    };
    let n = 2000;
    let h = top / n as f64;
    let mut sum = f(0.0) + f(top);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    sum * h / 3.0
}

/// Electronic stopping with the default model, eV/nm.
pub fn electronic_stopping(ion: &IonSpecies, mat: &TargetMaterial, energy_ev: f64) -> Result<f64, StoppingError> {
    StoppingModel::default().electronic_stopping(ion, mat, energy_ev)
}

pub fn nuclear_stopping(ion: &IonSpecies, mat: &TargetMaterial, energy_ev: f64) -> Result<f64, StoppingError> {
    StoppingModel::default().nuclear_stopping(ion, mat, energy_ev)
}

/// Projected range with the default model, nm.
pub fn csda_range(ion: &IonSpecies, mat: &TargetMaterial, energy_ev: f64) -> Result<f64, StoppingError> {
    StoppingModel::default().csda_range(ion, mat, energy_ev)
}

/// Solves for the electronic correction factor that puts the range of `ion`
/// at `energy_ev` in `mat` on `target_range_nm`.
pub fn calibrate_electronic_correction(
    base: &StoppingModel,
    ion: &IonSpecies,
    mat: &TargetMaterial,
    energy_ev: f64,
    target_range_nm: f64,
) -> Result<f64, StoppingError> {
    let range_for = |c: f64| {
        let model = StoppingModel { electronic_correction: c, ..*base };
        model.csda_range(ion, mat, energy_ev)
    };
    let (mut lo, mut hi) = (1e-3, 1e3);
    if range_for(lo)? < target_range_nm || range_for(hi)? > target_range_nm {
        return Err(StoppingError::Config("target range not reachable by electronic scaling".into()));
    }
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if range_for(mid)? > target_range_nm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Log-spaced stopping/range table for one ion/material pair.
#[derive(Debug, Clone)]
pub struct RangeTable {
    pub energies_ev: Vec<f64>,
    pub electronic: Vec<f64>,
    pub nuclear: Vec<f64>,
    pub range_nm: Vec<f64>,
    /// Range with electronic losses only; an upper bound on any path length.
    pub electronic_range_nm: Vec<f64>,
}

impl RangeTable {
    pub fn build(
        model: &StoppingModel,
        ion: &IonSpecies,
        mat: &TargetMaterial,
        e_min_ev: f64,
        e_max_ev: f64,
        points: usize,
    ) -> Result<Self, StoppingError> {
        if !(e_min_ev > 0.0 && e_max_ev > e_min_ev && points >= 2) {
            return Err(StoppingError::Config("range table needs 0 < e_min < e_max, >= 2 points".into()));
        }
        let k = model.electronic_slope(ion, mat);
        let ratio = (e_max_ev / e_min_ev).powf(1.0 / (points - 1) as f64);
        let energies_ev: Vec<f64> = (0..points).map(|i| e_min_ev * ratio.powi(i as i32)).collect();
        let mut electronic = Vec::with_capacity(points);
        let mut nuclear = Vec::with_capacity(points);
        let mut range_nm = Vec::with_capacity(points);
        let mut electronic_range_nm = Vec::with_capacity(points);
        for &e in &energies_ev {
            electronic.push(model.electronic_stopping(ion, mat, e)?);
            nuclear.push(model.nuclear_stopping(ion, mat, e)?);
            range_nm.push(model.csda_range(ion, mat, e)?);
            electronic_range_nm.push(2.0 * e.sqrt() / k);
        }
        Ok(Self { energies_ev, electronic, nuclear, range_nm, electronic_range_nm })
    }

    /// Linear interpolation in energy of the total range (nm).
    pub fn range_at(&self, energy_ev: f64) -> f64 {
        interp(&self.energies_ev, &self.range_nm, energy_ev)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "energy_eV,S_e,S_n,range_nm")?;
        for i in 0..self.energies_ev.len() {
            writeln!(
                out,
                "{:.6e},{:.6e},{:.6e},{:.6e}",
                self.energies_ev[i], self.electronic[i], self.nuclear[i], self.range_nm[i]
            )?;
        }
        Ok(())
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0] * x.max(0.0) / xs[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}
