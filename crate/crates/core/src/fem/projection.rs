use alloc::vec;
use alloc::vec::Vec;

use super::assembly::FemOperators;
use super::field::{ScalarField, VectorField};
use super::mesh::PeriodicMesh;
use super::solver::{solve_spd, SolveConfig};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

fn midpoint(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Assembles `(f, χ_i)` for `components`-valued data with the edge-midpoint
/// rule, which is exact for quadratics. `eval` writes `f(x)` into its buffer.
fn assemble_load(
    mesh: &PeriodicMesh,
    components: usize,
    mut eval: impl FnMut([f64; 2], &mut [f64; 2]),
) -> Vec<f64> {
    let mut load = vec![0.0; components * mesh.n_vertices()];
    let mut vals = [[0.0; 2]; 3];
    for (t, dofs) in mesh.triangles().iter().enumerate() {
        let [p0, p1, p2] = mesh.triangle_corners(t);
        let w = mesh.signed_area(t) / 3.0;
        // midpoints of edges opposite vertex 2, 0, 1 respectively
        eval(midpoint(p0, p1), &mut vals[0]);
        eval(midpoint(p1, p2), &mut vals[1]);
        eval(midpoint(p2, p0), &mut vals[2]);
        // a vertex's hat function is 1/2 on its two adjacent edge midpoints
        let touching = [[0, 2], [0, 1], [1, 2]];
        for (a, &d) in dofs.iter().enumerate() {
            let [e1, e2] = touching[a];
            for c in 0..components {
                load[components * d + c] += w * 0.5 * (vals[e1][c] + vals[e2][c]);
            }
        }
    }
    load
}

pub fn load_scalar(mesh: &PeriodicMesh, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    assemble_load(mesh, 1, |x, out| out[0] = f(x))
}

pub fn load_vector(mesh: &PeriodicMesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    assemble_load(mesh, 2, |x, out| *out = f(x))
}

/// L2 projection onto the scalar P1 space.
pub fn l2_project_scalar(
    mesh: &PeriodicMesh,
    ops: &FemOperators,
    f: impl Fn([f64; 2]) -> f64,
    cfg: &SolveConfig,
) -> Result<ScalarField> {
    let load = load_scalar(mesh, f);
    Ok(ScalarField::new(solve_spd(
        &ops.mass_s,
        &load,
        &cfg.undeflated(),
    )?))
}

/// L2 projection onto the vector P1 space.
pub fn l2_project_vector(
    mesh: &PeriodicMesh,
    ops: &FemOperators,
    f: impl Fn([f64; 2]) -> [f64; 2],
    cfg: &SolveConfig,
) -> Result<VectorField> {
    let load = load_vector(mesh, f);
    Ok(VectorField::new(solve_spd(
        &ops.mass_v,
        &load,
        &cfg.undeflated(),
    )?))
}

pub fn interpolate_scalar(mesh: &PeriodicMesh, f: impl Fn([f64; 2]) -> f64) -> ScalarField {
    ScalarField::new(mesh.vertices().iter().map(|&x| f(x)).collect())
}

pub fn interpolate_vector(mesh: &PeriodicMesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> VectorField {
    VectorField::new(mesh.vertices().iter().flat_map(|&x| f(x)).collect())
}

/// A P1 coefficient vector together with the operators that measure it.
pub trait FemField {
    fn coeffs(&self) -> &[f64];
    fn mass<'a>(&self, ops: &'a FemOperators) -> &'a CsrMatrix;
    fn stiffness<'a>(&self, ops: &'a FemOperators) -> &'a CsrMatrix;
}

impl FemField for ScalarField {
    fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
    fn mass<'a>(&self, ops: &'a FemOperators) -> &'a CsrMatrix {
        &ops.mass_s
    }
    fn stiffness<'a>(&self, ops: &'a FemOperators) -> &'a CsrMatrix {
        &ops.stiff_s
    }
}

impl FemField for VectorField {
    fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
    fn mass<'a>(&self, ops: &'a FemOperators) -> &'a CsrMatrix {
        &ops.mass_v
    }
    fn stiffness<'a>(&self, ops: &'a FemOperators) -> &'a CsrMatrix {
        &ops.stiff_v
    }
}

fn checked_form(op: &CsrMatrix, x: &[f64]) -> Result<f64> {
    if x.len() != op.ncols() {
        return Err(Error::DimensionMismatch {
            expected: op.ncols(),
            actual: x.len(),
        });
    }
    // clamp tiny negative roundoff of a semidefinite form
    Ok(libm::sqrt(op.quadratic_form(x).max(0.0)))
}

/// `sqrt(cᵀ M c)`
pub fn l2_norm<F: FemField>(field: &F, ops: &FemOperators) -> Result<f64> {
    checked_form(field.mass(ops), field.coeffs())
}

/// `sqrt(cᵀ K c)`
pub fn h1_seminorm<F: FemField>(field: &F, ops: &FemOperators) -> Result<f64> {
    checked_form(field.stiffness(ops), field.coeffs())
}
