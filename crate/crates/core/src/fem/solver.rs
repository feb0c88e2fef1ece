//! Preconditioned conjugate gradients with optional constant-mode deflation.
//!
//! The periodic Laplacian has the constants as its kernel. With
//! `deflate_constants` set, the right-hand side, the iterates and the
//! preconditioned residuals are kept orthogonal to the constant vector, which
//! turns the singular system into an SPD one on the complement.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::mesh::PeriodicMesh;
use super::sparse::{dot, norm2, CsrMatrix};
use crate::error::{Error, Result};

/// Largest admissible constant component of a deflated right-hand side,
/// relative to its l1 norm.
pub const DEFLATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub deflate_constants: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 10_000,
            deflate_constants: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn deflated(self) -> Self {
        Self {
            deflate_constants: true,
            ..self
        }
    }

    pub fn undeflated(self) -> Self {
        Self {
            deflate_constants: false,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Approximate inverse `z ≈ A⁻¹ r` applied inside CG.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub type SharedPreconditioner = Box<dyn Preconditioner + Send + Sync>;

/// Builds preconditioners for operators assembled on a mesh.
///
/// `components` is 1 for scalar operators and 2 for the interleaved,
/// block-diagonal vector operators.
pub trait PreconditionerFactory: Sync {
    fn build(&self, mesh: &PeriodicMesh, op: &CsrMatrix, components: usize)
        -> SharedPreconditioner;
}

/// Plain (unpreconditioned) CG.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityFactory;

impl PreconditionerFactory for IdentityFactory {
    fn build(&self, _: &PeriodicMesh, _: &CsrMatrix, _: usize) -> SharedPreconditioner {
        Box::new(IdentityPreconditioner)
    }
}

fn remove_constant(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Solves `op x = rhs` starting from the initial guess in `x`.
pub fn solve_spd_with(
    op: &CsrMatrix,
    rhs: &[f64],
    x: &mut [f64],
    cfg: &SolveConfig,
    pc: &dyn Preconditioner,
) -> Result<SolveStats> {
    cfg.validate()?;
    let n = op.nrows();
    for len in [rhs.len(), x.len(), op.ncols()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }

    let mut b = rhs.to_vec();
    if cfg.deflate_constants {
        let sum: f64 = b.iter().sum();
        let scale: f64 = b.iter().map(|v| v.abs()).sum();
        if sum.abs() > DEFLATION_TOL * scale {
            return Err(Error::IncompatibleRhs {
                component: sum / n as f64,
            });
        }
        remove_constant(&mut b);
        remove_constant(x);
    }
    let b_norm = norm2(&b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(SolveStats::default());
    }

    let mut r = op.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(&b) {
        *ri = bi - *ri;
    }
    if cfg.deflate_constants {
        remove_constant(&mut r);
    }
    let mut rel = norm2(&r) / b_norm;
    if rel <= cfg.rel_tol {
        return Ok(SolveStats {
            iterations: 0,
            rel_residual: rel,
        });
    }

    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    if cfg.deflate_constants {
        remove_constant(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for it in 1..=cfg.max_iter {
        op.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm2(&r) / b_norm;
        if rel <= cfg.rel_tol {
            if cfg.deflate_constants {
                remove_constant(x);
            }
            return Ok(SolveStats {
                iterations: it,
                rel_residual: rel,
            });
        }
        pc.apply(&r, &mut z);
        if cfg.deflate_constants {
            remove_constant(&mut z);
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::MaxIterationsExceeded {
        iterations: cfg.max_iter,
        residual: rel,
    })
}

/// Solves `op x = rhs` from a zero initial guess with plain CG.
pub fn solve_spd(op: &CsrMatrix, rhs: &[f64], cfg: &SolveConfig) -> Result<Vec<f64>> {
    let mut x = vec![0.0; rhs.len()];
    solve_spd_with(op, rhs, &mut x, cfg, &IdentityPreconditioner)?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_operators, PeriodicMesh};

    #[test]
    fn mass_system_recovers_target() {
        let mesh = PeriodicMesh::new(6).unwrap();
        let ops = assemble_operators(&mesh);
        let y: Vec<f64> = (0..36).map(|i| libm::sin(i as f64)).collect();
        let x = solve_spd(
            &ops.mass_s,
            &ops.mass_s.mul_vec(&y),
            &SolveConfig::default(),
        )
        .unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn deflated_kernel_gives_zero() {
        let mesh = PeriodicMesh::new(6).unwrap();
        let ops = assemble_operators(&mesh);
        let cfg = SolveConfig::default().deflated();
        let x = solve_spd(&ops.stiff_s, &[0.0; 36], &cfg).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn incompatible_rhs_is_rejected() {
        let mesh = PeriodicMesh::new(4).unwrap();
        let ops = assemble_operators(&mesh);
        let cfg = SolveConfig::default().deflated();
        let err = solve_spd(&ops.stiff_s, &[1.0; 16], &cfg).unwrap_err();
        assert!(matches!(err, Error::IncompatibleRhs { .. }));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let mesh = PeriodicMesh::new(8).unwrap();
        let ops = assemble_operators(&mesh);
        let mut rhs: Vec<f64> = (0..64).map(|i| libm::cos(0.3 * i as f64)).collect();
        remove_constant(&mut rhs);
        let cfg = SolveConfig {
            max_iter: 1,
            ..SolveConfig::default().deflated()
        };
        match solve_spd(&ops.stiff_s, &rhs, &cfg) {
            Err(Error::MaxIterationsExceeded {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = SolveConfig {
            rel_tol: 0.0,
            ..SolveConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolveConfig {
            max_iter: 0,
            ..SolveConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
