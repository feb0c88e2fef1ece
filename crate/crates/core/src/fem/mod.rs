//! Periodic P1 finite element infrastructure.

mod assembly;
mod field;
mod mesh;
mod projection;
mod solver;
mod sparse;

pub use assembly::{assemble_operators, FemOperators};
pub use field::{ScalarField, VectorField};
pub use mesh::PeriodicMesh;
pub use projection::{
    h1_seminorm, interpolate_scalar, interpolate_vector, l2_norm, l2_project_scalar,
    l2_project_vector, load_scalar, load_vector, FemField,
};
pub use solver::{
    solve_spd, solve_spd_with, IdentityFactory, IdentityPreconditioner, Preconditioner,
    PreconditionerFactory, SharedPreconditioner, SolveConfig, SolveStats, DEFLATION_TOL,
};
pub use sparse::CsrMatrix;

pub(crate) use sparse::norm2;

/// A mesh with its assembled operators, shared immutably between trajectories.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: PeriodicMesh,
    pub ops: FemOperators,
}

impl Discretization {
    pub fn new(n_cells: usize) -> crate::Result<Self> {
        let mesh = PeriodicMesh::new(n_cells)?;
        let ops = assemble_operators(&mesh);
        Ok(Self { mesh, ops })
    }
}
