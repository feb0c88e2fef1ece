//! Standard and Helmholtz-modified Chorin projection steppers.
//!
//! Both advance `(ũ, p)` through the combined form
//!
//! ```text
//! (M + kνK) ũⁿ⁺¹ = M ũⁿ − k G pⁿ + k (fⁿ⁺¹, v) + noise load
//! K pⁿ⁺¹         = (1/k) Gᵀ ũⁿ⁺¹          (deflated, zero mean)
//! ```
//!
//! so the end-of-step velocity `uⁿ = ũⁿ − k∇pⁿ`, which is piecewise
//! constant in its gradient part, never has to be stored: its only use is the
//! `M ũⁿ − k G pⁿ` term above.
//!
//! The standard noise load is `M (B(ũⁿ)·ΔW)` with the product taken nodally.
//! The modified scheme decomposes `g = B(ũⁿ)·ΔW` into `η + ∇ζ`, feeds only
//! `(η, v)` to the momentum equation and recovers `pⁿ⁺¹ = rⁿ⁺¹ + ζ/k`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    l2_norm, load_vector, solve_spd_with, CsrMatrix, Discretization, FemOperators,
    PreconditionerFactory, ScalarField, SharedPreconditioner, SolveConfig, VectorField,
};
use crate::stochastic::{evaluate_noise, solve_potential, IncrementTable, NoiseBasis, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standard,
    Modified,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::Modified => "modified",
        }
    }
}

/// Body force, evaluated at the end of each step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    Constant([f64; 2]),
    #[serde(skip)]
    TimeDependent(fn(f64, [f64; 2]) -> [f64; 2]),
}

#[derive(Debug, Clone, Copy)]
pub struct SchemeConfig {
    /// Number of steps `M`; the step is `k = T / M`.
    pub steps: usize,
    pub final_time: f64,
    pub viscosity: f64,
    pub forcing: Forcing,
    pub noise: NoiseModel,
    pub variant: Variant,
    pub solve: SolveConfig,
}

impl SchemeConfig {
    pub fn new(variant: Variant, steps: usize, noise: NoiseModel) -> Self {
        Self {
            steps,
            final_time: 1.0,
            viscosity: 1.0,
            forcing: Forcing::Constant([1.0, 1.0]),
            noise,
            variant,
            solve: SolveConfig::default(),
        }
    }

    pub fn step_size(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("step count must be at least 1"));
        }
        if !(self.final_time > 0.0) || !(self.viscosity > 0.0) {
            return Err(Error::invalid("final time and viscosity must be positive"));
        }
        self.solve.validate()
    }
}

/// Coefficient vectors carried from one step to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct ChorinState {
    pub u_tilde: VectorField,
    /// `pⁿ` for the standard scheme, the pseudo pressure `rⁿ` for the modified one.
    pub pressure: ScalarField,
    /// `pⁿ` for both schemes (`rⁿ + ζ/k` for the modified one).
    pub recovered_pressure: ScalarField,
    /// `k Σ_{n≤m} pⁿ`
    pub p_time_integral: ScalarField,
    /// `k Σ_{n≤m} rⁿ` (equal to `p_time_integral` for the standard scheme)
    pub r_time_integral: ScalarField,
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    pub momentum_iterations: usize,
    pub pressure_iterations: usize,
    pub helmholtz_iterations: usize,
}

/// Per-step residual of `(ũ, ∇φ) = k (∇p, ∇φ)` for every scalar basis function.
pub fn divergence_residual(
    ops: &FemOperators,
    u_tilde: &VectorField,
    pressure: &ScalarField,
    k: f64,
) -> Vec<f64> {
    let mut res = ops.divergence.mul_vec(&u_tilde.coeffs);
    let kp = ops.stiff_s.mul_vec(&pressure.coeffs);
    for (r, q) in res.iter_mut().zip(&kp) {
        *r -= k * q;
    }
    res
}

/// Fixed-step time integrator for one scheme on one discretization.
pub struct ChorinStepper {
    disc: Arc<Discretization>,
    cfg: SchemeConfig,
    k: f64,
    momentum: CsrMatrix,
    momentum_pc: SharedPreconditioner,
    poisson_pc: SharedPreconditioner,
    constant_force: Option<Vec<f64>>,
}

impl ChorinStepper {
    pub fn new(
        disc: Arc<Discretization>,
        cfg: SchemeConfig,
        factory: &dyn PreconditionerFactory,
    ) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.step_size();
        let ops = &disc.ops;
        let momentum = ops
            .mass_v
            .linear_combination(1.0, &ops.stiff_v, k * cfg.viscosity);
        let momentum_pc = factory.build(&disc.mesh, &momentum, 2);
        let poisson_pc = factory.build(&disc.mesh, &ops.stiff_s, 1);
        let constant_force = match cfg.forcing {
            Forcing::Constant(f) => {
                let nodal = VectorField::constant(disc.mesh.n_vertices(), f);
                Some(
                    ops.mass_v
                        .mul_vec(&nodal.coeffs)
                        .into_iter()
                        .map(|v| k * v)
                        .collect(),
                )
            }
            Forcing::TimeDependent(_) => None,
        };
        Ok(Self {
            disc,
            cfg,
            k,
            momentum,
            momentum_pc,
            poisson_pc,
            constant_force,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn step_size(&self) -> f64 {
        self.k
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    /// `p⁰ = r⁰ = 0` and `ũ⁰ = initial`.
    pub fn initial_state(&self, initial: VectorField) -> Result<ChorinState> {
        let n = self.disc.mesh.n_vertices();
        if initial.coeffs.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                actual: initial.coeffs.len(),
            });
        }
        let zero = ScalarField::zero_mean(alloc::vec![0.0; n]);
        Ok(ChorinState {
            u_tilde: initial,
            pressure: zero.clone(),
            recovered_pressure: zero.clone(),
            p_time_integral: zero.clone(),
            r_time_integral: zero,
            step_index: 0,
        })
    }

    fn force_load(&self, t_next: f64) -> Vec<f64> {
        match (&self.constant_force, self.cfg.forcing) {
            (Some(load), _) => load.clone(),
            (None, Forcing::TimeDependent(f)) => load_vector(&self.disc.mesh, |x| f(t_next, x))
                .into_iter()
                .map(|v| self.k * v)
                .collect(),
            (None, Forcing::Constant(_)) => unreachable!("constant forcing is precomputed"),
        }
    }

    /// Nodal `B(ũ)·ΔW`, or `None` when the noise vanishes identically.
    fn noise_product(&self, u: &VectorField, dw: &ScalarField) -> Result<Option<VectorField>> {
        if self.cfg.noise.is_zero() {
            return Ok(None);
        }
        if dw.coeffs.len() != self.disc.mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: self.disc.mesh.n_vertices(),
                actual: dw.coeffs.len(),
            });
        }
        let mut g = evaluate_noise(&self.cfg.noise, u);
        for (pair, w) in g.coeffs.chunks_exact_mut(2).zip(&dw.coeffs) {
            pair[0] *= w;
            pair[1] *= w;
        }
        Ok(Some(g))
    }

    /// Momentum and pressure solves shared by both variants.
    fn advance(
        &self,
        state: &mut ChorinState,
        noise_load: Option<Vec<f64>>,
        info: &mut StepInfo,
    ) -> Result<()> {
        let ops = &self.disc.ops;
        let t_next = (state.step_index + 1) as f64 * self.k;
        let mut rhs = ops.mass_v.mul_vec(&state.u_tilde.coeffs);
        let grad_p = ops.grad_coupling.mul_vec(&state.pressure.coeffs);
        let force = self.force_load(t_next);
        for i in 0..rhs.len() {
            rhs[i] += force[i] - self.k * grad_p[i];
        }
        if let Some(load) = noise_load {
            for (r, l) in rhs.iter_mut().zip(&load) {
                *r += l;
            }
        }
        let stats = solve_spd_with(
            &self.momentum,
            &rhs,
            &mut state.u_tilde.coeffs,
            &self.cfg.solve.undeflated(),
            self.momentum_pc.as_ref(),
        )?;
        info.momentum_iterations = stats.iterations;

        let div: Vec<f64> = ops
            .divergence_load(&state.u_tilde.coeffs)?
            .into_iter()
            .map(|v| v / self.k)
            .collect();
        let stats = solve_spd_with(
            &ops.stiff_s,
            &div,
            &mut state.pressure.coeffs,
            &self.cfg.solve.deflated(),
            self.poisson_pc.as_ref(),
        )?;
        ops.remove_mean(&mut state.pressure.coeffs);
        info.pressure_iterations = stats.iterations;
        Ok(())
    }

    fn accumulate(&self, state: &mut ChorinState) {
        for (acc, p) in state
            .p_time_integral
            .coeffs
            .iter_mut()
            .zip(&state.recovered_pressure.coeffs)
        {
            *acc += self.k * p;
        }
        for (acc, r) in state
            .r_time_integral
            .coeffs
            .iter_mut()
            .zip(&state.pressure.coeffs)
        {
            *acc += self.k * r;
        }
        state.step_index += 1;
    }

    fn check_step(&self, state: &ChorinState) -> Result<()> {
        if state.step_index >= self.cfg.steps {
            return Err(Error::invalid("trajectory already reached the final time"));
        }
        Ok(())
    }

    pub fn standard_step(&self, state: &mut ChorinState, dw: &ScalarField) -> Result<StepInfo> {
        self.check_step(state)?;
        let mut info = StepInfo::default();
        let noise_load = self
            .noise_product(&state.u_tilde, dw)?
            .map(|g| self.disc.ops.mass_v.mul_vec(&g.coeffs));
        self.advance(state, noise_load, &mut info)?;
        state.recovered_pressure = state.pressure.clone();
        self.accumulate(state);
        Ok(info)
    }

    pub fn modified_step(&self, state: &mut ChorinState, dw: &ScalarField) -> Result<StepInfo> {
        self.check_step(state)?;
        let ops = &self.disc.ops;
        let mut info = StepInfo::default();
        let decomposition = match self.noise_product(&state.u_tilde, dw)? {
            Some(g) => {
                let rhs = ops.divergence_load(&g.coeffs)?;
                let (zeta, stats) =
                    solve_potential(ops, &rhs, &self.cfg.solve, self.poisson_pc.as_ref())?;
                info.helmholtz_iterations = stats.iterations;
                let mut load = ops.mass_v.mul_vec(&g.coeffs);
                for (l, gz) in load.iter_mut().zip(ops.grad_coupling.mul_vec(&zeta.coeffs)) {
                    *l -= gz;
                }
                Some((zeta, load))
            }
            None => None,
        };
        let (zeta, load) = match decomposition {
            Some((z, l)) => (Some(z), Some(l)),
            None => (None, None),
        };
        self.advance(state, load, &mut info)?;
        state.recovered_pressure = match zeta {
            Some(z) => ScalarField::zero_mean(
                state
                    .pressure
                    .coeffs
                    .iter()
                    .zip(&z.coeffs)
                    .map(|(r, z)| r + z / self.k)
                    .collect(),
            ),
            None => state.pressure.clone(),
        };
        self.accumulate(state);
        Ok(info)
    }

    pub fn step(&self, state: &mut ChorinState, dw: &ScalarField) -> Result<StepInfo> {
        match self.cfg.variant {
            Variant::Standard => self.standard_step(state, dw),
            Variant::Modified => self.modified_step(state, dw),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoragePolicy {
    FullFields,
    NormsOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub time: f64,
    pub u_norm: f64,
    pub p_integral_norm: f64,
    pub u_tilde: Option<VectorField>,
    pub pressure: Option<ScalarField>,
    pub p_time_integral: Option<ScalarField>,
    pub r_time_integral: Option<ScalarField>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub policy: StoragePolicy,
    /// Total number of steps `M` of the run.
    pub steps: usize,
    pub step_size: f64,
    pub n_cells: usize,
    pub checkpoints: Vec<Checkpoint>,
}

impl TrajectoryRecord {
    pub fn checkpoint_at(&self, step: usize) -> Option<&Checkpoint> {
        self.checkpoints
            .binary_search_by_key(&step, |c| c.step)
            .ok()
            .map(|i| &self.checkpoints[i])
    }
}

/// Converts checkpoint times to step indices; every time must sit on the grid.
pub fn checkpoint_steps(times: &[f64], step_size: f64, steps: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let n = libm::round(t / step_size);
        if !(n >= 0.0)
            || libm::fabs(t - n * step_size) > 1e-9 * step_size.max(1.0)
            || n as usize > steps
        {
            return Err(Error::CheckpointMismatch(alloc::format!(
                "time {t} is not on the grid of step {step_size} up to step {steps}"
            )));
        }
        out.push(n as usize);
    }
    Ok(out)
}

fn snapshot(
    state: &ChorinState,
    k: f64,
    ops: &FemOperators,
    policy: StoragePolicy,
) -> Result<Checkpoint> {
    let full = policy == StoragePolicy::FullFields;
    Ok(Checkpoint {
        step: state.step_index,
        time: state.step_index as f64 * k,
        u_norm: l2_norm(&state.u_tilde, ops)?,
        p_integral_norm: l2_norm(&state.p_time_integral, ops)?,
        u_tilde: full.then(|| state.u_tilde.clone()),
        pressure: full.then(|| state.recovered_pressure.clone()),
        p_time_integral: full.then(|| state.p_time_integral.clone()),
        r_time_integral: full.then(|| state.r_time_integral.clone()),
    })
}

/// Runs `M = increments.steps()` steps from `initial`, recording the requested
/// step indices (strictly increasing, each in `0..=M`).
pub fn run_trajectory(
    stepper: &ChorinStepper,
    increments: &IncrementTable,
    basis: &NoiseBasis,
    initial: VectorField,
    checkpoints: &[usize],
    policy: StoragePolicy,
) -> Result<TrajectoryRecord> {
    let cfg = stepper.config();
    if increments.steps() != cfg.steps {
        return Err(Error::DimensionMismatch {
            expected: cfg.steps,
            actual: increments.steps(),
        });
    }
    if libm::fabs(increments.step_size() - stepper.step_size()) > 1e-12 * stepper.step_size() {
        return Err(Error::invalid(
            "increment table step size differs from the scheme step",
        ));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1])
        || checkpoints.last().is_some_and(|&c| c > cfg.steps)
    {
        return Err(Error::CheckpointMismatch(
            "checkpoints must be strictly increasing and within the run".into(),
        ));
    }
    let ops = &stepper.discretization().ops;
    let k = stepper.step_size();
    let mut state = stepper.initial_state(initial)?;
    let mut record = TrajectoryRecord {
        policy,
        steps: cfg.steps,
        step_size: k,
        n_cells: stepper.discretization().mesh.n_cells(),
        checkpoints: Vec::with_capacity(checkpoints.len()),
    };
    let mut next = checkpoints.iter().peekable();
    if next.peek() == Some(&&0) {
        record.checkpoints.push(snapshot(&state, k, ops, policy)?);
        next.next();
    }
    for m in 0..cfg.steps {
        let dw = basis.increment_field(increments.row(m))?;
        stepper.step(&mut state, &dw).map_err(|e| e.at_step(m))?;
        if next.peek() == Some(&&(m + 1)) {
            record.checkpoints.push(snapshot(&state, k, ops, policy)?);
            next.next();
        }
    }
    Ok(record)
}
