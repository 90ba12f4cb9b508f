use std::f64::consts::PI;

use crate::mathdiff::{Complex, DiffScalar, Real, Tape, VACUUM_PERMITTIVITY};

/// How a material's permittivity and conductivity depend on frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialModel {
    Constant {
        relative_permittivity: f64,
        /// S/m
        conductivity: f64,
    },
    /// ITU-style power law with `f` in GHz:
    /// `ε_r = a·f^b`, `σ = c·f^d`.
    PowerLaw { a: f64, b: f64, c: f64, d: f64 },
}

/// Non-magnetic (μ_r = 1) radio material.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMaterial {
    pub name: String,
    pub model: MaterialModel,
    pub trainable: bool,
}

/// Which material parameter a leaf stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MaterialQuantity {
    Permittivity,
    Conductivity,
}

impl MaterialQuantity {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaterialQuantity::Permittivity => "permittivity",
            MaterialQuantity::Conductivity => "conductivity",
        }
    }
}

/// Tape leaf name used for a material parameter.
pub fn material_leaf_name(material: &str, quantity: MaterialQuantity) -> String {
    format!("{material}.{}", quantity.as_str())
}

/// Relative permittivity and conductivity at the carrier, possibly taped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams<T> {
    pub permittivity: T,
    pub conductivity: T,
}

impl<T: Real> MaterialParams<T> {
    /// Complex relative permittivity `η = ε_r − j·σ/(2π f ε₀)`.
    pub fn eta(&self, frequency_hz: f64) -> Complex<T> {
        let scale = 1.0 / (2.0 * PI * frequency_hz * VACUUM_PERMITTIVITY);
        Complex::new(self.permittivity, -(self.conductivity * scale))
    }
}

impl RadioMaterial {
    pub fn constant(name: impl Into<String>, relative_permittivity: f64, conductivity: f64) -> Self {
        Self {
            name: name.into(),
            model: MaterialModel::Constant {
                relative_permittivity,
                conductivity,
            },
            trainable: false,
        }
    }

    /// Plain parameter values at `frequency_hz`.
    pub fn params(&self, frequency_hz: f64) -> MaterialParams<f64> {
        match self.model {
            MaterialModel::Constant {
                relative_permittivity,
                conductivity,
            } => MaterialParams {
                permittivity: relative_permittivity,
                conductivity,
            },
            MaterialModel::PowerLaw { a, b, c, d } => {
                let f_ghz = frequency_hz / 1e9;
                MaterialParams {
                    permittivity: a * f_ghz.powf(b),
                    conductivity: c * f_ghz.powf(d),
                }
            }
        }
    }
}

/// Material evaluated at a carrier frequency.
#[derive(Debug, Clone, Copy)]
pub struct MaterialValue<'t> {
    pub permittivity: DiffScalar<'t>,
    pub conductivity: DiffScalar<'t>,
    pub eta: Complex<DiffScalar<'t>>,
}

/// Evaluates `m` at `frequency_hz`. When the material is trainable and a
/// tape is supplied, ε_r and σ are registered as leaves named
/// `<material>.permittivity` and `<material>.conductivity`.
pub fn material_eval<'t>(m: &RadioMaterial, frequency_hz: f64, tape: Option<&'t Tape>) -> MaterialValue<'t> {
    let p = m.params(frequency_hz);
    let (permittivity, conductivity) = match (m.trainable, tape) {
        (true, Some(t)) => (
            t.leaf(
                material_leaf_name(&m.name, MaterialQuantity::Permittivity),
                p.permittivity,
            ),
            t.leaf(
                material_leaf_name(&m.name, MaterialQuantity::Conductivity),
                p.conductivity,
            ),
        ),
        _ => (
            DiffScalar::constant(p.permittivity),
            DiffScalar::constant(p.conductivity),
        ),
    };
    let params = MaterialParams {
        permittivity,
        conductivity,
    };
    MaterialValue {
        permittivity,
        conductivity,
        eta: params.eta(frequency_hz),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathdiff::grad;
    use proptest::prelude::*;

    #[test]
    fn vacuum_has_unit_eta() {
        let v = RadioMaterial::constant("vacuum", 1.0, 0.0);
        for f in [1e6, 1e9, 28e9] {
            let e = material_eval(&v, f, None).eta.value();
            assert_eq!(e, Complex::new(1.0, 0.0));
        }
    }

    #[test]
    fn concrete_power_law_at_3_5_ghz() {
        let concrete = RadioMaterial {
            name: "concrete".into(),
            model: MaterialModel::PowerLaw {
                a: 5.24,
                b: 0.0,
                c: 0.0462,
                d: 0.7822,
            },
            trainable: false,
        };
        let v = material_eval(&concrete, 3.5e9, None);
        assert_eq!(v.permittivity.value(), 5.24);
        // 0.0462 · 3.5^0.7822, evaluated independently.
        assert!((v.conductivity.value() - 0.123_086_947_027_060_31).abs() < 1e-15);
        let expect_im = -0.123_086_947_027_060_31 / (2.0 * PI * 3.5e9 * 8.854_187_812_8e-12);
        assert!((v.eta.im.value() - expect_im).abs() < 1e-12);
    }

    #[test]
    fn trainable_constant_registers_leaves() {
        let mut m = RadioMaterial::constant("trainee", 3.0, 0.1);
        m.trainable = true;
        let tape = Tape::new();
        let v = material_eval(&m, 1e9, Some(&tape));
        assert!(v.permittivity.is_tracked() && v.conductivity.is_tracked());
        let g = grad(&tape, v.permittivity).unwrap();
        assert_eq!(g.get("trainee.permittivity"), Some(1.0));
        assert_eq!(g.get("trainee.conductivity"), Some(0.0));
    }

    #[test]
    fn trainable_and_plain_evaluate_identically() {
        let mut m = RadioMaterial::constant("m", 4.2, 0.03);
        let plain = material_eval(&m, 2.4e9, None).eta.value();
        m.trainable = true;
        let tape = Tape::new();
        let taped = material_eval(&m, 2.4e9, Some(&tape)).eta.value();
        assert_eq!(plain, taped);
    }

    proptest! {
        #[test]
        fn conductivity_rises_with_frequency_when_d_positive(
            a in 1.0..10.0f64, c in 1e-4..1.0f64, d in 0.01..2.0f64,
            f1 in 0.1..50.0f64, df in 0.01..50.0f64,
        ) {
            let m = RadioMaterial {
                name: "x".into(),
                model: MaterialModel::PowerLaw { a, b: 0.0, c, d },
                trainable: false,
            };
            let lo = m.params(f1 * 1e9);
            let hi = m.params((f1 + df) * 1e9);
            prop_assert!(hi.conductivity > lo.conductivity);
            prop_assert_eq!(hi.permittivity, lo.permittivity);
        }
    }
}
