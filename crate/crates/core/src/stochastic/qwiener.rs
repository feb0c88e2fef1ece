use core::f64::consts::PI;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::rng::NormalStream;
use crate::error::{Error, Result};
use crate::fem::{PeriodicMesh, ScalarField};

/// Grid on which increments are stored. Every increment is rounded to a
/// multiple of 2^-40, which makes all partial sums of a path exact in f64
/// (for |sums| < 2^13), so coarsening is exact whatever the grouping.
pub const INCREMENT_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

/// One covariance eigenpair: `e(x) = 2 sin(jπx₁) sin(ℓπx₂)` with
/// eigenvalue `‖g‖ / (j+ℓ)²`, `‖g‖ = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QWienerMode {
    pub j: u32,
    pub l: u32,
    pub eigenvalue: f64,
}

impl QWienerMode {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        2.0 * libm::sin(self.j as f64 * PI * x[0]) * libm::sin(self.l as f64 * PI * x[1])
    }

    pub fn label(&self) -> (u32, u32) {
        (self.j, self.l)
    }
}

/// Truncated spectral expansion of the Q-Wiener process over `(j,ℓ) ∈ {1..J}²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QWienerSpec {
    truncation: u32,
    modes: Vec<QWienerMode>,
}

impl QWienerSpec {
    pub fn new(truncation: u32) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::invalid("Q-Wiener truncation J must be at least 1"));
        }
        let norm_g = 0.5;
        let mut modes = Vec::with_capacity((truncation * truncation) as usize);
        for j in 1..=truncation {
            for l in 1..=truncation {
                let s = (j + l) as f64;
                modes.push(QWienerMode {
                    j,
                    l,
                    eigenvalue: norm_g / (s * s),
                });
            }
        }
        Ok(Self { truncation, modes })
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn modes(&self) -> &[QWienerMode] {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }
}

/// How a fine increment is scaled from a standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IncrementScaling {
    /// `√k0 · √λ · β`, a Brownian increment.
    #[default]
    #[serde(rename = "sqrt_k")]
    SqrtStep,
    /// `k0 · √λ · β`, the literal printed formula.
    #[serde(rename = "k")]
    Step,
}

/// Per-step, per-mode increments on a uniform time grid, stored row-major
/// (`steps × modes`).
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementTable {
    steps: usize,
    modes: usize,
    step_size: f64,
    data: Vec<f64>,
}

impl IncrementTable {
    pub fn new(steps: usize, modes: usize, step_size: f64, data: Vec<f64>) -> Result<Self> {
        if data.len() != steps * modes {
            return Err(Error::DimensionMismatch {
                expected: steps * modes,
                actual: data.len(),
            });
        }
        Ok(Self {
            steps,
            modes,
            step_size,
            data,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n_modes(&self) -> usize {
        self.modes
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// Increments over step `m`, i.e. over `[t_m, t_{m+1}]`.
    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.modes..(m + 1) * self.modes]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Sums consecutive groups of `factor` rows, in ascending order.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(Error::NonDivisibleFactor {
                factor,
                steps: self.steps,
            });
        }
        let steps = self.steps / factor;
        let mut data = vec![0.0; steps * self.modes];
        for m in 0..steps {
            let out = &mut data[m * self.modes..(m + 1) * self.modes];
            for fine in m * factor..(m + 1) * factor {
                for (o, v) in out.iter_mut().zip(self.row(fine)) {
                    *o += v;
                }
            }
        }
        Ok(Self {
            steps,
            modes: self.modes,
            step_size: self.step_size * factor as f64,
            data,
        })
    }

    /// Per-mode sum over all steps.
    pub fn totals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.modes];
        for m in 0..self.steps {
            for (o, v) in out.iter_mut().zip(self.row(m)) {
                *o += v;
            }
        }
        out
    }
}

/// One sampled realization at the finest time resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub seed: u64,
    pub scaling: IncrementScaling,
    increments: IncrementTable,
}

impl BrownianPath {
    pub fn fine_steps(&self) -> usize {
        self.increments.steps
    }

    pub fn fine_step_size(&self) -> f64 {
        self.increments.step_size
    }

    pub fn increments(&self) -> &IncrementTable {
        &self.increments
    }

    /// Increments at step `factor · k0`.
    pub fn coarsen(&self, factor: usize) -> Result<IncrementTable> {
        self.increments.coarsen(factor)
    }
}

/// Samples increments row by row (step-major, modes in `spec.modes()` order)
/// from the normal stream seeded with `seed`.
pub fn sample_brownian_path(
    spec: &QWienerSpec,
    fine_steps: usize,
    final_time: f64,
    seed: u64,
    scaling: IncrementScaling,
) -> Result<BrownianPath> {
    if fine_steps == 0 {
        return Err(Error::invalid("a Brownian path needs at least one step"));
    }
    if !(final_time > 0.0) {
        return Err(Error::invalid("final time must be positive"));
    }
    let k0 = final_time / fine_steps as f64;
    let step_factor = match scaling {
        IncrementScaling::SqrtStep => libm::sqrt(k0),
        IncrementScaling::Step => k0,
    };
    let scales: Vec<f64> = spec
        .modes()
        .iter()
        .map(|m| step_factor * libm::sqrt(m.eigenvalue))
        .collect();
    let mut normals = NormalStream::new(seed);
    let mut data = Vec::with_capacity(fine_steps * scales.len());
    for _ in 0..fine_steps {
        for s in &scales {
            let raw = s * normals.next_normal();
            data.push(libm::round(raw / INCREMENT_QUANTUM) * INCREMENT_QUANTUM);
        }
    }
    Ok(BrownianPath {
        seed,
        scaling,
        increments: IncrementTable::new(fine_steps, scales.len(), k0, data)?,
    })
}

/// Values of every mode at every mesh vertex (`vertices × modes`).
#[derive(Debug, Clone)]
pub struct NoiseBasis {
    modes: usize,
    values: Vec<f64>,
}

impl NoiseBasis {
    pub fn new(spec: &QWienerSpec, mesh: &PeriodicMesh) -> Self {
        let values = mesh
            .vertices()
            .iter()
            .flat_map(|&x| spec.modes().iter().map(move |m| m.eval(x)))
            .collect();
        Self {
            modes: spec.n_modes(),
            values,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.modes
    }

    /// Nodal values `ΔW(x_v) = Σ_modes increment · e(x_v)`.
    pub fn increment_field(&self, increments: &[f64]) -> Result<ScalarField> {
        if increments.len() != self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                actual: increments.len(),
            });
        }
        let coeffs = self
            .values
            .chunks_exact(self.modes)
            .map(|row| row.iter().zip(increments).map(|(e, b)| e * b).sum())
            .collect();
        Ok(ScalarField::new(coeffs))
    }
}
