//! Strong-norm error contributions of one realization.
//!
//! The coarse record is compared with the reference at the coarse times
//! `t_m = m k`; when the meshes differ the coarse fields are first prolonged
//! to the reference mesh by P1 interpolation. Time-averaged quantities use
//! `k Σ_{m=1}^{M}`; the `m = 0` term vanishes whenever both runs share
//! their initial data.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::{Discretization, PeriodicMesh, ScalarField, VectorField};
use crate::scheme::{Checkpoint, TrajectoryRecord};

/// Relative bound on the discrete mean of an accumulated pressure.
pub const MEAN_GUARD: f64 = 1e-9;

/// Evaluates P1 coefficients given on `from` at the vertices of `to`.
pub fn prolong(
    values: &[f64],
    components: usize,
    from: &PeriodicMesh,
    to: &PeriodicMesh,
) -> Vec<f64> {
    if from.n_cells() == to.n_cells() {
        return values.to_vec();
    }
    let mut out = Vec::with_capacity(components * to.n_vertices());
    for &x in to.vertices() {
        let (dofs, w) = from.locate(x);
        for c in 0..components {
            out.push(
                w[0] * values[components * dofs[0] + c]
                    + w[1] * values[components * dofs[1] + c]
                    + w[2] * values[components * dofs[2] + c],
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityErrors {
    pub step_size: f64,
    /// `‖u_ref(t_m) − ũ^m‖²` for `m = 0..=M`.
    pub squared: Vec<f64>,
    /// `‖k Σ_{m≤ℓ} ∇(u_ref(t_m) − ũ^m)‖²` for `ℓ = 0..=M`.
    pub gradsum_squared: Vec<f64>,
}

impl VelocityErrors {
    pub fn max_squared(&self) -> f64 {
        self.squared.iter().copied().fold(0.0, f64::max)
    }

    /// `k Σ_{m=1}^{M} ‖·‖²`
    pub fn time_averaged_squared(&self) -> f64 {
        self.step_size * self.squared.iter().skip(1).sum::<f64>()
    }

    pub fn e_u_max(&self) -> f64 {
        libm::sqrt(self.max_squared())
    }

    pub fn e_u_av(&self) -> f64 {
        libm::sqrt(self.time_averaged_squared())
    }

    pub fn e_gradsum(&self) -> f64 {
        libm::sqrt(self.gradsum_squared.iter().copied().fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureErrors {
    pub step_size: f64,
    /// `‖P_ref(t_m) − k Σ_{n≤m} pⁿ‖²` for `m = 0..=M`.
    pub squared: Vec<f64>,
}

impl PressureErrors {
    pub fn time_averaged_squared(&self) -> f64 {
        self.step_size * self.squared.iter().skip(1).sum::<f64>()
    }

    pub fn e_p_av(&self) -> f64 {
        libm::sqrt(self.time_averaged_squared())
    }
}

/// Pairs every coarse checkpoint with the reference checkpoint at the same time.
fn matched<'a>(
    reference: &'a TrajectoryRecord,
    coarse: &'a TrajectoryRecord,
) -> Result<Vec<(&'a Checkpoint, &'a Checkpoint)>> {
    if coarse.steps == 0 || !reference.steps.is_multiple_of(coarse.steps) {
        return Err(Error::CheckpointMismatch(alloc::format!(
            "reference steps {} not a multiple of coarse steps {}",
            reference.steps,
            coarse.steps
        )));
    }
    if coarse.checkpoints.len() != coarse.steps + 1
        || coarse
            .checkpoints
            .iter()
            .enumerate()
            .any(|(m, c)| c.step != m)
    {
        return Err(Error::CheckpointMismatch(
            "coarse record must hold every step 0..=M".into(),
        ));
    }
    let ratio = reference.steps / coarse.steps;
    coarse
        .checkpoints
        .iter()
        .map(|c| {
            reference
                .checkpoint_at(c.step * ratio)
                .map(|r| (r, c))
                .ok_or_else(|| {
                    Error::CheckpointMismatch(alloc::format!("reference lacks time {}", c.time))
                })
        })
        .collect()
}

fn vector_of(c: &Checkpoint) -> Result<&VectorField> {
    c.u_tilde
        .as_ref()
        .ok_or_else(|| Error::CheckpointMismatch("velocity snapshot missing".into()))
}

fn integral_of(c: &Checkpoint) -> Result<&ScalarField> {
    c.p_time_integral
        .as_ref()
        .ok_or_else(|| Error::CheckpointMismatch("pressure accumulator snapshot missing".into()))
}

pub fn velocity_error_norms(
    reference: &TrajectoryRecord,
    coarse: &TrajectoryRecord,
    disc: &Discretization,
) -> Result<VelocityErrors> {
    let pairs = matched(reference, coarse)?;
    let coarse_mesh = PeriodicMesh::new(coarse.n_cells)?;
    let ops = &disc.ops;
    let k = coarse.step_size;
    let mut squared = Vec::with_capacity(pairs.len());
    let mut gradsum_squared = Vec::with_capacity(pairs.len());
    let mut running = alloc::vec![0.0; 2 * disc.mesh.n_vertices()];
    for (r, c) in pairs {
        let rv = vector_of(r)?;
        let cv = prolong(&vector_of(c)?.coeffs, 2, &coarse_mesh, &disc.mesh);
        if cv.len() != rv.coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: rv.coeffs.len(),
                actual: cv.len(),
            });
        }
        let diff: Vec<f64> = rv.coeffs.iter().zip(&cv).map(|(a, b)| a - b).collect();
        squared.push(ops.mass_v.quadratic_form(&diff).max(0.0));
        for (s, d) in running.iter_mut().zip(&diff) {
            *s += k * d;
        }
        gradsum_squared.push(ops.stiff_v.quadratic_form(&running).max(0.0));
    }
    Ok(VelocityErrors {
        step_size: k,
        squared,
        gradsum_squared,
    })
}

fn check_mean(disc: &Discretization, p: &[f64]) -> Result<()> {
    let mean = disc.ops.discrete_mean(p);
    let scale = 1.0 + p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if libm::fabs(mean) > MEAN_GUARD * scale {
        return Err(Error::NonZeroMean { mean });
    }
    Ok(())
}

pub fn pressure_error_norm(
    reference: &TrajectoryRecord,
    coarse: &TrajectoryRecord,
    disc: &Discretization,
) -> Result<PressureErrors> {
    let pairs = matched(reference, coarse)?;
    let coarse_mesh = PeriodicMesh::new(coarse.n_cells)?;
    let mut squared = Vec::with_capacity(pairs.len());
    for (r, c) in pairs {
        let rp = integral_of(r)?;
        let cp = integral_of(c)?;
        check_mean(disc, &rp.coeffs)?;
        let cp = prolong(&cp.coeffs, 1, &coarse_mesh, &disc.mesh);
        check_mean(disc, &cp)?;
        if cp.len() != rp.coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: rp.coeffs.len(),
                actual: cp.len(),
            });
        }
        let diff: Vec<f64> = rp.coeffs.iter().zip(&cp).map(|(a, b)| a - b).collect();
        squared.push(disc.ops.mass_s.quadratic_form(&diff).max(0.0));
    }
    Ok(PressureErrors {
        step_size: coarse.step_size,
        squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prolongation_is_exact_for_nested_p1() {
        let coarse = PeriodicMesh::new(4).unwrap();
        let fine = PeriodicMesh::new(8).unwrap();
        let values: Vec<f64> = (0..16).map(|i| (i * i % 7) as f64).collect();
        let up = prolong(&values, 1, &coarse, &fine);
        for (v, x) in up.iter().zip(fine.vertices()) {
            assert!((v - coarse.interpolate(&values, *x)).abs() < 1e-14);
        }
        // coarse vertices keep their values
        assert_eq!(up[fine.dof(2, 4)], values[coarse.dof(1, 2)]);
        assert_eq!(prolong(&values, 1, &coarse, &coarse), values);
    }
}
