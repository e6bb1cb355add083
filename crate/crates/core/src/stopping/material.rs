use serde::{Deserialize, Serialize};

use super::elements;
use super::StoppingError;

/// Avogadro constant, 1/mol.
pub const AVOGADRO: f64 = 6.022_140_76e23;

/// Implanted ion: atomic number and mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    atomic_number: u32,
    mass_u: f64,
}

impl IonSpecies {
    pub fn new(atomic_number: u32, mass_u: f64) -> Result<Self, StoppingError> {
        if atomic_number == 0 {
            return Err(StoppingError::Config("ion atomic number must be >= 1".into()));
        }
        if !(mass_u > 0.0 && mass_u.is_finite()) {
            return Err(StoppingError::Config(format!("ion mass must be > 0 u, got {mass_u}")));
        }
        Ok(Self { atomic_number, mass_u })
    }

    /// Mass-analyzed ²⁸Si beam.
    pub fn silicon() -> Self {
        Self { atomic_number: 14, mass_u: 27.977 }
    }

    pub fn atomic_number(&self) -> u32 {
        self.atomic_number
    }

    pub fn mass_u(&self) -> f64 {
        self.mass_u
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub atomic_number: u32,
    pub mass_u: f64,
    /// Stoichiometric (atom-number) fraction.
    pub fraction: f64,
}

/// A homogeneous target: element mix plus mass density.
///
/// Construction validates the composition, so every `TargetMaterial` in
/// circulation has known elements, fractions summing to one and a positive
/// density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetMaterial {
    name: String,
    components: Vec<Component>,
    mass_density_g_cm3: f64,
}

impl TargetMaterial {
    pub fn new(
        name: impl Into<String>,
        components: Vec<Component>,
        mass_density_g_cm3: f64,
    ) -> Result<Self, StoppingError> {
        let name = name.into();
        if components.is_empty() {
            return Err(StoppingError::Config(format!("material {name}: no components")));
        }
        if !(mass_density_g_cm3 > 0.0 && mass_density_g_cm3.is_finite()) {
            return Err(StoppingError::Config(format!(
                "material {name}: density must be > 0 g/cm3, got {mass_density_g_cm3}"
            )));
        }
        for c in &components {
            if elements::symbol(c.atomic_number).is_none() {
                return Err(StoppingError::UnknownElement(c.atomic_number.to_string()));
            }
            if !(c.mass_u > 0.0) || !(c.fraction > 0.0) {
                return Err(StoppingError::Config(format!(
                    "material {name}: component Z={} needs positive mass and fraction",
                    c.atomic_number
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.fraction).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(StoppingError::Config(format!(
                "material {name}: fractions sum to {total}, expected 1"
            )));
        }
        Ok(Self { name, components, mass_density_g_cm3 })
    }

    /// Single-element material with the standard atomic mass.
    pub fn element(name: &str, symbol: &str, mass_density_g_cm3: f64) -> Result<Self, StoppingError> {
        let z = elements::atomic_number(symbol)
            .ok_or_else(|| StoppingError::UnknownElement(symbol.to_string()))?;
        let mass_u = elements::standard_mass(z).expect("table covers every known symbol");
        Self::new(name, vec![Component { atomic_number: z, mass_u, fraction: 1.0 }], mass_density_g_cm3)
    }

    pub fn diamond() -> Self {
        Self::element("diamond", "C", 3.52).expect("builtin")
    }

    /// Pinhole foil, modeled as pure iron.
    pub fn steel() -> Self {
        Self::element("steel", "Fe", 7.87).expect("builtin")
    }

    /// Al2O3; listed for completeness, not used in transport.
    pub fn sapphire() -> Self {
        Self::new(
            "sapphire",
            vec![
                Component { atomic_number: 13, mass_u: 26.982, fraction: 0.4 },
                Component { atomic_number: 8, mass_u: 15.999, fraction: 0.6 },
            ],
            3.98,
        )
        .expect("builtin")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "diamond" => Some(Self::diamond()),
            "steel" | "iron" => Some(Self::steel()),
            "sapphire" => Some(Self::sapphire()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn mass_density_g_cm3(&self) -> f64 {
        self.mass_density_g_cm3
    }

    /// Mean atomic mass in u.
    pub fn mean_mass_u(&self) -> f64 {
        self.components.iter().map(|c| c.fraction * c.mass_u).sum()
    }

    /// Atoms per cm³.
    pub fn atomic_density(&self) -> f64 {
        self.mass_density_g_cm3 * AVOGADRO / self.mean_mass_u()
    }

    /// Atoms per nm³.
    pub fn atomic_density_nm3(&self) -> f64 {
        self.atomic_density() * 1e-21
    }

    /// Mean interatomic spacing n^(-1/3), nm.
    pub fn mean_spacing_nm(&self) -> f64 {
        self.atomic_density_nm3().powf(-1.0 / 3.0)
    }
}

/// Text form of a material: `[[material]]` tables in a TOML document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialConfig {
    pub name: String,
    pub density_g_cm3: f64,
    pub components: Vec<ComponentConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentConfig {
    pub element: String,
    /// Defaults to the standard atomic mass.
    #[serde(default)]
    pub mass_u: Option<f64>,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IonConfig {
    pub element: String,
    #[serde(default)]
    pub mass_u: Option<f64>,
}

impl MaterialConfig {
    pub fn build(&self) -> Result<TargetMaterial, StoppingError> {
        let components = self
            .components
            .iter()
            .map(|c| {
                let z = elements::atomic_number(&c.element)
                    .ok_or_else(|| StoppingError::UnknownElement(c.element.clone()))?;
                let mass_u = c.mass_u.unwrap_or_else(|| elements::standard_mass(z).unwrap());
                Ok(Component { atomic_number: z, mass_u, fraction: c.fraction })
            })
            .collect::<Result<Vec<_>, StoppingError>>()?;
        TargetMaterial::new(self.name.clone(), components, self.density_g_cm3)
    }
}

impl IonConfig {
    pub fn build(&self) -> Result<IonSpecies, StoppingError> {
        let z = elements::atomic_number(&self.element)
            .ok_or_else(|| StoppingError::UnknownElement(self.element.clone()))?;
        IonSpecies::new(z, self.mass_u.unwrap_or_else(|| elements::standard_mass(z).unwrap()))
    }
}

#[derive(Debug, Deserialize)]
struct MaterialFile {
    #[serde(default)]
    material: Vec<MaterialConfig>,
}

/// Parses every `[[material]]` table in a TOML document.
pub fn load_materials(text: &str) -> Result<Vec<TargetMaterial>, StoppingError> {
    let file: MaterialFile =
        toml::from_str(text).map_err(|e| StoppingError::Config(e.to_string()))?;
    file.material.iter().map(MaterialConfig::build).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diamond_density_matches_composition() {
        let d = TargetMaterial::diamond();
        // 3.52 g/cm3 / 12.011 u
        let expected = 3.52 / 12.011 * AVOGADRO;
        assert!((d.atomic_density() / expected - 1.0).abs() < 1e-12);
        assert!((d.atomic_density() - 1.765e23).abs() < 1e20);
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let bad = TargetMaterial::new(
            "x",
            vec![Component { atomic_number: 6, mass_u: 12.0, fraction: 0.7 }],
            1.0,
        );
        assert!(matches!(bad, Err(StoppingError::Config(_))));
    }

    #[test]
    fn rejects_unknown_element_and_bad_density() {
        assert!(matches!(
            TargetMaterial::element("x", "Qq", 1.0),
            Err(StoppingError::UnknownElement(_))
        ));
        let z0 = TargetMaterial::new(
            "x",
            vec![Component { atomic_number: 0, mass_u: 1.0, fraction: 1.0 }],
            1.0,
        );
        assert!(matches!(z0, Err(StoppingError::UnknownElement(_))));
        assert!(TargetMaterial::element("x", "C", 0.0).is_err());
        assert!(TargetMaterial::element("x", "C", -3.0).is_err());
        assert!(IonSpecies::new(0, 28.0).is_err());
        assert!(IonSpecies::new(14, 0.0).is_err());
    }

    #[test]
    fn loads_toml_materials() {
        let text = r#"
            [[material]]
            name = "steel"
            density_g_cm3 = 7.87
            components = [ { element = "Fe", fraction = 1.0 } ]

            [[material]]
            name = "sapphire"
            density_g_cm3 = 3.98
            components = [
                { element = "Al", fraction = 0.4 },
                { element = "O", fraction = 0.6, mass_u = 16.0 },
            ]
        "#;
        let mats = load_materials(text).unwrap();
        assert_eq!(mats.len(), 2);
        assert_eq!(mats[0].components()[0].atomic_number, 26);
        assert_eq!(mats[1].components()[1].mass_u, 16.0);

        let bad = r#"
            [[material]]
            name = "x"
            density_g_cm3 = 1.0
            components = [ { element = "Zz", fraction = 1.0 } ]
        "#;
        assert!(matches!(load_materials(bad), Err(StoppingError::UnknownElement(_))));
    }
}
