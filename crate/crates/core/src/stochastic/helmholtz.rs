//! Discrete Helmholtz decomposition of a nodal vector load.
//!
//! For a P1 vector field `g`, the potential `ζ_h` solves
//! `(∇ζ_h, ∇φ_h) = (g, ∇φ_h)` for all scalar `φ_h` and has zero mean. The
//! solenoidal remainder `η = g − ∇ζ_h` is not a P1 field (its gradient part
//! is piecewise constant), so it is kept as the pair `(g, ζ_h)` and only its
//! load `(η, v_h) = M g − G ζ` is ever formed.

use alloc::vec::Vec;

use crate::error::Result;
use crate::fem::{
    solve_spd_with, FemOperators, IdentityPreconditioner, Preconditioner, ScalarField, SolveConfig,
    SolveStats, VectorField,
};

#[derive(Debug, Clone, PartialEq)]
pub struct HelmholtzResult {
    /// Zero-mean potential `ζ_h`.
    pub potential: ScalarField,
    /// The decomposed field `g`.
    pub nodal_load: VectorField,
    pub stats: SolveStats,
}

impl HelmholtzResult {
    /// Load vector `(η, v_h)` for every vector basis function.
    pub fn projected_load(&self, ops: &FemOperators) -> Vec<f64> {
        let mut load = ops.mass_v.mul_vec(&self.nodal_load.coeffs);
        let grad = ops.grad_coupling.mul_vec(&self.potential.coeffs);
        for (l, g) in load.iter_mut().zip(&grad) {
            *l -= g;
        }
        load
    }

    /// `(η, ∇φ_j)` for every scalar basis function; zero up to solver tolerance.
    pub fn orthogonality_residual(&self, ops: &FemOperators) -> Vec<f64> {
        let mut res = ops.divergence.mul_vec(&self.nodal_load.coeffs);
        let kz = ops.stiff_s.mul_vec(&self.potential.coeffs);
        for (r, k) in res.iter_mut().zip(&kz) {
            *r -= k;
        }
        res
    }
}

/// Solves `K ζ = rhs` with deflation for a given divergence load `rhs_j = (g, ∇φ_j)`.
pub fn solve_potential(
    ops: &FemOperators,
    divergence_load: &[f64],
    cfg: &SolveConfig,
    pc: &dyn Preconditioner,
) -> Result<(ScalarField, SolveStats)> {
    let mut zeta = alloc::vec![0.0; ops.n_scalar()];
    let stats = solve_spd_with(
        &ops.stiff_s,
        divergence_load,
        &mut zeta,
        &cfg.deflated(),
        pc,
    )?;
    ops.remove_mean(&mut zeta);
    Ok((ScalarField::zero_mean(zeta), stats))
}

pub fn helmholtz_decompose_with(
    ops: &FemOperators,
    load: &VectorField,
    cfg: &SolveConfig,
    pc: &dyn Preconditioner,
) -> Result<HelmholtzResult> {
    let rhs = ops.divergence_load(&load.coeffs)?;
    let (potential, stats) = solve_potential(ops, &rhs, cfg, pc)?;
    Ok(HelmholtzResult {
        potential,
        nodal_load: load.clone(),
        stats,
    })
}

pub fn helmholtz_decompose(
    ops: &FemOperators,
    load: &VectorField,
    cfg: &SolveConfig,
) -> Result<HelmholtzResult> {
    helmholtz_decompose_with(ops, load, cfg, &IdentityPreconditioner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{norm2, Discretization};

    fn pseudo_random(n: usize, seed: f64) -> Vec<f64> {
        (0..n)
            .map(|i| libm::sin(seed * (i as f64 + 1.0) * 12.9898) * 3.1)
            .collect()
    }

    #[test]
    fn constant_load_is_solenoidal() {
        let d = Discretization::new(6).unwrap();
        let g = VectorField::constant(36, [0.7, -2.0]);
        let res = helmholtz_decompose(&d.ops, &g, &SolveConfig::default()).unwrap();
        assert!(res.potential.coeffs.iter().all(|&c| c.abs() < 1e-13));
        let load = res.projected_load(&d.ops);
        let direct = d.ops.mass_v.mul_vec(&g.coeffs);
        for (a, b) in load.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn random_load_orthogonality() {
        let d = Discretization::new(8).unwrap();
        let g = VectorField::new(pseudo_random(128, 0.31));
        let cfg = SolveConfig::default();
        let res = helmholtz_decompose(&d.ops, &g, &cfg).unwrap();
        let rhs_norm = norm2(&d.ops.divergence.mul_vec(&g.coeffs));
        assert!(norm2(&res.orthogonality_residual(&d.ops)) <= 1e-9 * rhs_norm.max(1.0));
        assert!(d.ops.discrete_mean(&res.potential.coeffs).abs() < 1e-14);
    }
}
