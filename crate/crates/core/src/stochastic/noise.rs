use serde::{Deserialize, Serialize};

use crate::fem::VectorField;

/// Pointwise map applied to the nodal velocity.
pub type CustomNoise = fn([f64; 2]) -> [f64; 2];

/// Multiplicative noise operator `B(u)`, evaluated nodally.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    Zero,
    /// `u_i ↦ c · √(u_i² + 1)` componentwise.
    SqrtPlusOne {
        coefficient: f64,
    },
    #[serde(skip)]
    Custom(CustomNoise),
}

impl NoiseModel {
    pub fn apply(&self, u: [f64; 2]) -> [f64; 2] {
        match *self {
            NoiseModel::Zero => [0.0, 0.0],
            NoiseModel::SqrtPlusOne { coefficient } => {
                u.map(|ui| coefficient * libm::sqrt(ui * ui + 1.0))
            }
            NoiseModel::Custom(f) => f(u),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NoiseModel::Zero)
    }

    /// Componentwise Lipschitz constant, when known.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match *self {
            NoiseModel::Zero => Some(0.0),
            NoiseModel::SqrtPlusOne { coefficient } => Some(libm::fabs(coefficient)),
            NoiseModel::Custom(_) => None,
        }
    }
}

/// Nodal interpolant of `B(u)`.
pub fn evaluate_noise(model: &NoiseModel, u: &VectorField) -> VectorField {
    if model.is_zero() {
        return VectorField::zeros(u.n_vertices());
    }
    let coeffs = u
        .coeffs
        .chunks_exact(2)
        .flat_map(|pair| model.apply([pair[0], pair[1]]))
        .collect();
    VectorField::new(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_model() {
        let u = VectorField::constant(3, [4.0, -1.0]);
        assert!(evaluate_noise(&NoiseModel::Zero, &u)
            .coeffs
            .iter()
            .all(|&c| c == 0.0));
    }

    #[test]
    fn values_at_rest() {
        let u = VectorField::zeros(5);
        let b10 = evaluate_noise(&NoiseModel::SqrtPlusOne { coefficient: 10.0 }, &u);
        assert!(b10.coeffs.iter().all(|&c| c == 10.0));
        let b1 = evaluate_noise(&NoiseModel::SqrtPlusOne { coefficient: 1.0 }, &u);
        assert!(b1.coeffs.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn custom_model() {
        fn double(u: [f64; 2]) -> [f64; 2] {
            [2.0 * u[0], 2.0 * u[1]]
        }
        let m = NoiseModel::Custom(double);
        assert_eq!(m.apply([1.0, 3.0]), [2.0, 6.0]);
        assert_eq!(m.lipschitz_constant(), None);
    }

    proptest! {
        #[test]
        fn lipschitz_and_growth(c in 0.1f64..20.0, a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let m = NoiseModel::SqrtPlusOne { coefficient: c };
            let (ba, bb) = (m.apply([a, a])[0], m.apply([b, b])[0]);
            prop_assert!((ba - bb).abs() <= c * (a - b).abs() * (1.0 + 1e-12) + 1e-12);
            prop_assert!(ba <= c * (1.0 + a.abs()) * (1.0 + 1e-12));
        }
    }
}
