use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Nodal coefficients of a scalar P1 function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub coeffs: Vec<f64>,
    /// Set for pressure-like fields kept at zero discrete mean.
    pub zero_mean: bool,
}

impl ScalarField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self {
            coeffs,
            zero_mean: false,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn zero_mean(coeffs: Vec<f64>) -> Self {
        Self {
            coeffs,
            zero_mean: true,
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Nodal coefficients of a 2-vector P1 function, interleaved as
/// `[u1(v0), u2(v0), u1(v1), u2(v1), ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub coeffs: Vec<f64>,
}

impl VectorField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        debug_assert!(coeffs.len().is_multiple_of(2));
        Self { coeffs }
    }

    pub fn zeros(n_vertices: usize) -> Self {
        Self::new(vec![0.0; 2 * n_vertices])
    }

    pub fn constant(n_vertices: usize, value: [f64; 2]) -> Self {
        Self::new((0..n_vertices).flat_map(|_| value).collect())
    }

    pub fn from_components(first: &[f64], second: &[f64]) -> Self {
        assert_eq!(first.len(), second.len());
        Self::new(
            first
                .iter()
                .zip(second)
                .flat_map(|(&a, &b)| [a, b])
                .collect(),
        )
    }

    pub fn n_vertices(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.coeffs.iter().skip(c).step_by(2).copied().collect()
    }

    pub fn nodal(&self, v: usize) -> [f64; 2] {
        [self.coeffs[2 * v], self.coeffs[2 * v + 1]]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_round_trip() {
        let a = [1.0, 2.0, 3.0];
        let b = [-1.0, -2.0, -3.0];
        let v = VectorField::from_components(&a, &b);
        assert_eq!(v.component(0), a);
        assert_eq!(v.component(1), b);
        assert_eq!(v.nodal(1), [2.0, -2.0]);
        assert_eq!(
            VectorField::constant(2, [1.0, 5.0]).coeffs,
            vec![1.0, 5.0, 1.0, 5.0]
        );
    }
}
