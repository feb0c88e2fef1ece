use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Corner offsets (in cells) of the two triangles of a grid cell. Every cell
/// is cut along its (i,j) -> (i+1,j+1) diagonal, both halves counter-clockwise.
const LOWER: [[usize; 2]; 3] = [[0, 0], [1, 0], [1, 1]];
const UPPER: [[usize; 2]; 3] = [[0, 0], [1, 1], [0, 1]];

/// Uniform triangulation of the unit torus `(0,1)^2` with periodic vertex
/// identification.
///
/// Grid vertex `(i, j)` maps to dof `(i mod N) + N * (j mod N)`. Triangle
/// `2c` is the lower and `2c + 1` the upper half of cell `c = i + N * j`.
#[derive(Debug, Clone)]
pub struct PeriodicMesh {
    n: usize,
    h: f64,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
}

fn wrap_unit(x: f64) -> f64 {
    let r = x - libm::floor(x);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl PeriodicMesh {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::invalid("mesh needs at least one cell per direction"));
        }
        let n = n_cells;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                for corners in [LOWER, UPPER] {
                    triangles.push(corners.map(|[di, dj]| (i + di) % n + n * ((j + dj) % n)));
                }
            }
        }
        Ok(Self {
            n,
            h,
            vertices,
            triangles,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Coordinates of the unique vertices, in `[0, 1)^2`.
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Dof triples of every triangle.
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Periodic map from a geometric grid index to its unique dof.
    pub fn dof(&self, i: isize, j: isize) -> usize {
        let n = self.n as isize;
        (i.rem_euclid(n) + n * j.rem_euclid(n)) as usize
    }

    /// Unwrapped corner coordinates of triangle `t` (may touch `x = 1` or `y = 1`).
    pub fn triangle_corners(&self, t: usize) -> [[f64; 2]; 3] {
        let cell = t / 2;
        let (i, j) = (cell % self.n, cell / self.n);
        let offsets = if t.is_multiple_of(2) { LOWER } else { UPPER };
        offsets.map(|[di, dj]| [(i + di) as f64 * self.h, (j + dj) as f64 * self.h])
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_corners(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Number of triangles incident to each dof. With every incident edge
    /// shared by two triangles this equals the edge valence.
    pub fn vertex_valence(&self) -> Vec<usize> {
        let mut valence = vec![0; self.n_vertices()];
        for tri in &self.triangles {
            for &v in tri {
                valence[v] += 1;
            }
        }
        valence
    }

    /// Locates `x` (wrapped onto the torus) and returns the containing
    /// triangle's dofs together with the barycentric weights.
    pub fn locate(&self, x: [f64; 2]) -> ([usize; 3], [f64; 3]) {
        let n = self.n as f64;
        let sx = wrap_unit(x[0]) * n;
        let sy = wrap_unit(x[1]) * n;
        let i = libm::floor(sx).min(n - 1.0);
        let j = libm::floor(sy).min(n - 1.0);
        let (s, t) = (sx - i, sy - j);
        let (i, j) = (i as isize, j as isize);
        if s >= t {
            (
                [self.dof(i, j), self.dof(i + 1, j), self.dof(i + 1, j + 1)],
                [1.0 - s, s - t, t],
            )
        } else {
            (
                [self.dof(i, j), self.dof(i + 1, j + 1), self.dof(i, j + 1)],
                [1.0 - t, s, t - s],
            )
        }
    }

    /// Evaluates the P1 function with nodal values `values` at `x`.
    pub fn interpolate(&self, values: &[f64], x: [f64; 2]) -> f64 {
        let (dofs, w) = self.locate(x);
        w[0] * values[dofs[0]] + w[1] * values[dofs[1]] + w[2] * values[dofs[2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_grid() {
        assert!(PeriodicMesh::new(0).is_err());
    }

    #[test]
    fn smallest_grid() {
        let mesh = PeriodicMesh::new(1).unwrap();
        assert_eq!(mesh.n_vertices(), 1);
        assert_eq!(mesh.n_triangles(), 2);
        let area: f64 = (0..2).map(|t| mesh.signed_area(t)).sum();
        assert!((area - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_counts() {
        let mesh = PeriodicMesh::new(2).unwrap();
        assert_eq!(mesh.n_vertices(), 4);
        assert_eq!(mesh.n_triangles(), 8);
        assert!(mesh.vertex_valence().iter().all(|&v| v == 6));
    }

    #[test]
    fn fine_mesh_counts() {
        let mesh = PeriodicMesh::new(50).unwrap();
        assert!((mesh.h() - 0.02).abs() < 1e-15);
        assert_eq!(mesh.n_vertices(), 2500);
        assert_eq!(mesh.n_triangles(), 5000);
    }

    #[test]
    fn areas_positive_and_sum_to_one() {
        for n in [3, 7, 16] {
            let mesh = PeriodicMesh::new(n).unwrap();
            let h = mesh.h();
            let mut total = 0.0;
            for t in 0..mesh.n_triangles() {
                let a = mesh.signed_area(t);
                assert!((a - 0.5 * h * h).abs() < 1e-15);
                total += a;
            }
            assert!((total - 1.0).abs() < 1e-14);
            assert!(mesh.vertex_valence().iter().all(|&v| v == 6));
        }
    }

    #[test]
    fn periodic_map_wraps() {
        let mesh = PeriodicMesh::new(4).unwrap();
        assert_eq!(mesh.dof(4, 0), mesh.dof(0, 0));
        assert_eq!(mesh.dof(-1, -1), mesh.dof(3, 3));
        assert_eq!(mesh.dof(1, 2), 9);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_linear_data() {
        let mesh = PeriodicMesh::new(5).unwrap();
        let values: Vec<f64> = (0..mesh.n_vertices())
            .map(|v| v as f64 * 0.37 - 2.0)
            .collect();
        for (v, x) in mesh.vertices().iter().enumerate() {
            assert!((mesh.interpolate(&values, *x) - values[v]).abs() < 1e-13);
        }
        // wrapped coordinates
        let x = mesh.vertices()[7];
        assert!((mesh.interpolate(&values, [x[0] + 1.0, x[1] - 1.0]) - values[7]).abs() < 1e-13);
    }
}
