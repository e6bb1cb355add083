//! ZBL universal screened-Coulomb interaction: screening function, scattering
//! angle of a binary collision and the universal nuclear stopping cross section.
//!
//! All angle work happens in reduced units: reduced energy `eps = a E_cm / (Z1 Z2 e²)`
//! and reduced impact parameter `b = p / a`, with `a` the universal screening
//! length. In those units the center-of-mass deflection is the same function
//! for every ion/target pair, so a single cached table serves all of them.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::material::IonSpecies;

pub const BOHR_RADIUS_NM: f64 = 0.052_917_721_09;
/// e²/(4πε₀) in eV·nm.
pub const COULOMB_EV_NM: f64 = 1.439_964_548;

const COEFFS: [(f64, f64); 4] = [
    (0.18175, 3.1998),
    (0.50986, 0.94229),
    (0.28022, 0.4029),
    (0.028171, 0.20162),
];

/// Gauss-Mehler order (number of nodes over [-1, 1]).
const MEHLER_ORDER: usize = 96;

/// Universal screening function phi(x), x = r/a.
pub fn screening(x: f64) -> f64 {
    COEFFS.iter().map(|(c, d)| c * (-d * x).exp()).sum()
}

fn screening_slope(x: f64) -> f64 {
    COEFFS.iter().map(|(c, d)| -c * d * (-d * x).exp()).sum()
}

/// Universal screening length, nm.
pub fn screening_length_nm(z1: u32, z2: u32) -> f64 {
    0.8854 * BOHR_RADIUS_NM / ((z1 as f64).powf(0.23) + (z2 as f64).powf(0.23))
}

/// Reduced (center-of-mass) energy for a lab-frame projectile energy in eV.
pub fn reduced_energy(z1: u32, m1: f64, z2: u32, m2: f64, energy_ev: f64) -> f64 {
    let a = screening_length_nm(z1, z2);
    a * energy_ev * m2 / ((m1 + m2) * (z1 * z2) as f64 * COULOMB_EV_NM)
}

/// Reduced distance of closest approach for reduced energy `eps` and reduced
/// impact parameter `b`: the single positive root of
/// `x² - x·phi(x)/eps - b² = 0`.
pub fn closest_approach(eps: f64, b: f64) -> f64 {
    let f = |x: f64| x * x - x * screening(x) / eps - b * b;
    let df = |x: f64| 2.0 * x - (screening(x) + x * screening_slope(x)) / eps;

    let mut lo = 0.0;
    let mut hi = b.max(1.0 / eps).max(1e-12);
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = if b > 0.0 && f(b) < 0.0 { 0.5 * (b + hi) } else { hi };
    for _ in 0..200 {
        let fx = f(x);
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = fx / df(x);
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * next.max(1e-300) || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Center-of-mass scattering angle in reduced units, evaluated by
/// Gauss-Mehler quadrature of the classical scattering integral.
pub fn reduced_scattering_angle(eps: f64, b: f64) -> f64 {
    if b <= 0.0 {
        return PI;
    }
    let x0 = closest_approach(eps, b);
    let n = MEHLER_ORDER;
    let mut sum = 0.0;
    for j in 1..=n / 2 {
        let u = ((2 * j - 1) as f64 * PI / (2 * n) as f64).cos();
        let x = x0 / u;
        let g = 1.0 - screening(x) / (x * eps) - (b / x).powi(2);
        sum += ((1.0 - u * u) / g).sqrt();
    }
    let theta = PI - 2.0 * b / x0 * PI / n as f64 * sum;
    theta.clamp(0.0, PI)
}

/// Center-of-mass deflection (rad) of `ion` on a target atom at lab energy
/// `energy_ev` and impact parameter `impact_parameter_nm`.
pub fn zbl_scattering_angle(
    ion: &IonSpecies,
    target_z: u32,
    target_mass_u: f64,
    energy_ev: f64,
    impact_parameter_nm: f64,
) -> f64 {
    let z1 = ion.atomic_number();
    let a = screening_length_nm(z1, target_z);
    let eps = reduced_energy(z1, ion.mass_u(), target_z, target_mass_u, energy_ev);
    reduced_scattering_angle(eps, impact_parameter_nm / a)
}

/// ZBL universal reduced nuclear stopping s_n(eps).
pub fn reduced_nuclear_stopping(eps: f64) -> f64 {
    if eps <= 0.0 {
        0.0
    } else if eps > 30.0 {
        eps.ln() / (2.0 * eps)
    } else {
        (1.0 + 1.1383 * eps).ln()
            / (2.0 * (eps + 0.01321 * eps.powf(0.21226) + 0.19593 * eps.sqrt()))
    }
}

/// Nuclear stopping cross section per target atom, eV·nm².
pub fn nuclear_stopping_cross_section(z1: u32, m1: f64, z2: u32, m2: f64, energy_ev: f64) -> f64 {
    let eps = reduced_energy(z1, m1, z2, m2, energy_ev);
    let a = screening_length_nm(z1, z2);
    4.0 * PI * a * (z1 * z2) as f64 * COULOMB_EV_NM * m1 / (m1 + m2) * reduced_nuclear_stopping(eps)
}

/// Bilinear table of the reduced scattering angle over (ln eps, ln b).
pub struct AngleTable {
    ln_eps0: f64,
    ln_b0: f64,
    step: f64,
    n_eps: usize,
    n_b: usize,
    theta: Vec<f64>,
}

const TABLE_EPS_RANGE: (f64, f64) = (1e-3, 1e4);
const TABLE_B_RANGE: (f64, f64) = (1e-4, 40.0);
const TABLE_POINTS_PER_DECADE: f64 = 60.0;

impl AngleTable {
    fn build() -> Self {
        let step = std::f64::consts::LN_10 / TABLE_POINTS_PER_DECADE;
        let ln_eps0 = TABLE_EPS_RANGE.0.ln();
        let ln_b0 = TABLE_B_RANGE.0.ln();
        let n_eps = ((TABLE_EPS_RANGE.1.ln() - ln_eps0) / step).ceil() as usize + 1;
        let n_b = ((TABLE_B_RANGE.1.ln() - ln_b0) / step).ceil() as usize + 1;
        let mut theta = Vec::with_capacity(n_eps * n_b);
        for i in 0..n_eps {
            let eps = (ln_eps0 + i as f64 * step).exp();
            for j in 0..n_b {
                let b = (ln_b0 + j as f64 * step).exp();
                theta.push(reduced_scattering_angle(eps, b));
            }
        }
        Self { ln_eps0, ln_b0, step, n_eps, n_b, theta }
    }

    /// Shared process-wide table, built on first use.
    pub fn global() -> &'static AngleTable {
        static TABLE: OnceLock<AngleTable> = OnceLock::new();
        TABLE.get_or_init(AngleTable::build)
    }

    /// Interpolated angle, or `None` outside the tabulated domain.
    pub fn lookup(&self, eps: f64, b: f64) -> Option<f64> {
        if !(eps > 0.0 && b > 0.0) {
            return None;
        }
        let u = (eps.ln() - self.ln_eps0) / self.step;
        let v = (b.ln() - self.ln_b0) / self.step;
        if !(u >= 0.0 && v >= 0.0) {
            return None;
        }
        let (i, j) = (u as usize, v as usize);
        if i + 1 >= self.n_eps || j + 1 >= self.n_b {
            return None;
        }
        let (fu, fv) = (u - i as f64, v - j as f64);
        let at = |ii: usize, jj: usize| self.theta[ii * self.n_b + jj];
        Some(
            (1.0 - fu) * ((1.0 - fv) * at(i, j) + fv * at(i, j + 1))
                + fu * ((1.0 - fv) * at(i + 1, j) + fv * at(i + 1, j + 1)),
        )
    }

    /// Table value when available, direct quadrature otherwise.
    pub fn angle(&self, eps: f64, b: f64) -> f64 {
        self.lookup(eps, b).unwrap_or_else(|| reduced_scattering_angle(eps, b))
    }
}
