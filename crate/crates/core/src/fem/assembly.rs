use alloc::vec::Vec;

use super::mesh::PeriodicMesh;
use super::solver::DEFLATION_TOL;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Assembled P1 operators on a periodic mesh.
///
/// Vector dofs are interleaved: `(vertex i, component c) -> 2i + c`.
/// `grad_coupling` has entries `G[(i,c), j] = ∫ ∂_c χ_j φ_(i,c)`, so that
/// `vᵀ G q = (∇q_h, v_h)`; `divergence = Gᵀ` maps a vector coefficient
/// vector to the loads `(v_h, ∇χ_j)`.
#[derive(Debug, Clone)]
pub struct FemOperators {
    pub mass_s: CsrMatrix,
    pub stiff_s: CsrMatrix,
    pub mass_v: CsrMatrix,
    pub stiff_v: CsrMatrix,
    pub grad_coupling: CsrMatrix,
    pub divergence: CsrMatrix,
}

/// Gradients of the three barycentric basis functions and the area.
pub(crate) fn basis_gradients(corners: &[[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let [p0, p1, p2] = *corners;
    let area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let grads = [
        [(p1[1] - p2[1]) / area2, (p2[0] - p1[0]) / area2],
        [(p2[1] - p0[1]) / area2, (p0[0] - p2[0]) / area2],
        [(p0[1] - p1[1]) / area2, (p1[0] - p0[0]) / area2],
    ];
    (grads, 0.5 * area2)
}

pub fn assemble_operators(mesh: &PeriodicMesh) -> FemOperators {
    let n = mesh.n_vertices();
    let cap = 9 * mesh.n_triangles();
    let mut mass = Vec::with_capacity(cap);
    let mut stiff = Vec::with_capacity(cap);
    let mut mass_v = Vec::with_capacity(2 * cap);
    let mut stiff_v = Vec::with_capacity(2 * cap);
    let mut grad = Vec::with_capacity(2 * cap);

    for (t, dofs) in mesh.triangles().iter().enumerate() {
        let (g, area) = basis_gradients(&mesh.triangle_corners(t));
        for a in 0..3 {
            for b in 0..3 {
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                let k = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                let (i, j) = (dofs[a], dofs[b]);
                mass.push((i, j, m));
                stiff.push((i, j, k));
                for c in 0..2 {
                    mass_v.push((2 * i + c, 2 * j + c, m));
                    stiff_v.push((2 * i + c, 2 * j + c, k));
                    grad.push((2 * i + c, j, area / 3.0 * g[b][c]));
                }
            }
        }
    }

    let grad_coupling = CsrMatrix::from_triplets(2 * n, n, grad);
    FemOperators {
        mass_s: CsrMatrix::from_triplets(n, n, mass),
        stiff_s: CsrMatrix::from_triplets(n, n, stiff),
        mass_v: CsrMatrix::from_triplets(2 * n, 2 * n, mass_v),
        stiff_v: CsrMatrix::from_triplets(2 * n, 2 * n, stiff_v),
        divergence: grad_coupling.transpose(),
        grad_coupling,
    }
}

impl FemOperators {
    pub fn n_scalar(&self) -> usize {
        self.mass_s.nrows()
    }

    /// `1ᵀ M p / 1ᵀ M 1` for a scalar coefficient vector.
    pub fn discrete_mean(&self, coeffs: &[f64]) -> f64 {
        let mp = self.mass_s.mul_vec(coeffs);
        let area: f64 = self.mass_s.triplets().map(|(_, _, v)| v).sum();
        mp.iter().sum::<f64>() / area
    }

    /// `Gᵀ v` with its constant component removed.
    ///
    /// The entries of `Gᵀ v` sum to zero in exact arithmetic for every `v`
    /// under periodicity; the rounding left over is checked against the size of
    /// the individual contributions before it is projected out.
    pub fn divergence_load(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.divergence.try_mul_vec(v)?;
        let magnitude: f64 = self
            .divergence
            .triplets()
            .map(|(_, c, d)| libm::fabs(d * v[c]))
            .sum();
        let sum: f64 = out.iter().sum();
        if libm::fabs(sum) > DEFLATION_TOL * magnitude {
            return Err(Error::IncompatibleRhs {
                component: sum / out.len() as f64,
            });
        }
        let mean = sum / out.len() as f64;
        for o in out.iter_mut() {
            *o -= mean;
        }
        Ok(out)
    }

    /// Subtracts the discrete mean in place.
    ///
    /// A second pass removes the rounding left by the first.
    pub fn remove_mean(&self, coeffs: &mut [f64]) {
        for _ in 0..2 {
            let mean = self.discrete_mean(coeffs);
            for c in coeffs.iter_mut() {
                *c -= mean;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_by_two_mass_diagonal() {
        let mesh = PeriodicMesh::new(2).unwrap();
        let ops = assemble_operators(&mesh);
        for i in 0..4 {
            assert!((ops.mass_s.get(i, i) - 0.125).abs() < 1e-15);
            let row: f64 = ops.mass_s.row(i).1.iter().sum();
            assert!((row - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn kernels_and_partition_of_unity() {
        for n in [1, 2, 5, 8] {
            let mesh = PeriodicMesh::new(n).unwrap();
            let ops = assemble_operators(&mesh);
            let ones = vec![1.0; mesh.n_vertices()];
            assert!(ops.stiff_s.mul_vec(&ones).iter().all(|v| v.abs() < 1e-14));
            assert!((ops.mass_s.quadratic_form(&ones) - 1.0).abs() < 1e-14);
            assert!(ops
                .grad_coupling
                .mul_vec(&ones)
                .iter()
                .all(|v| v.abs() < 1e-14));
            assert_eq!(ops.mass_s.max_asymmetry(), 0.0);
            assert_eq!(ops.stiff_s.max_asymmetry(), 0.0);
            assert_eq!(ops.mass_v.max_asymmetry(), 0.0);
            assert_eq!(ops.stiff_v.max_asymmetry(), 0.0);
        }
    }

    #[test]
    fn mean_removal() {
        let mesh = PeriodicMesh::new(4).unwrap();
        let ops = assemble_operators(&mesh);
        let mut p: Vec<f64> = (0..16).map(|i| i as f64).collect();
        assert!((ops.discrete_mean(&p) - 7.5).abs() < 1e-12);
        ops.remove_mean(&mut p);
        let m = ops.discrete_mean(&p);
        assert!(m.abs() < 1e-14, "{m}");
    }
}
