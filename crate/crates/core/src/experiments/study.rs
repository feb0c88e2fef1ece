//! Monte Carlo convergence study.
//!
//! Every realization samples one fine Brownian path, runs the reference
//! trajectory at `(k0, reference_n)` and then every coarse `(N, k)` level on
//! increments summed from the same path. Per-realization error contributions
//! are folded, in realization order, into streaming (Welford) accumulators.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::norms::{pressure_error_norm, velocity_error_norms, PressureErrors, VelocityErrors};
use super::rate::{fit_rate, RateFit};
use crate::error::{Error, Result};
use crate::fem::{Discretization, PreconditionerFactory, SolveConfig, VectorField};
use crate::scheme::{run_trajectory, ChorinStepper, Forcing, SchemeConfig, StoragePolicy, Variant};
use crate::stochastic::{
    mix64, sample_brownian_path, BrownianPath, IncrementScaling, NoiseBasis, NoiseModel,
    QWienerSpec,
};

/// How mesh sizes and time steps are paired into study levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Every mesh size with every time step.
    FixedH,
    /// `mesh_sizes[i]` with `time_steps[i]`, chosen so that `h ≈ k`.
    BalancedHk,
    /// `mesh_sizes[i]` with `time_steps[i]`, chosen so that `h ≈ √k`.
    BalancedHsqrtk,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudySpec {
    pub variant: Variant,
    /// Coarse mesh resolutions `N` (`h = 1/N`).
    pub mesh_sizes: Vec<usize>,
    /// Coarse step counts `M` (`k = T/M`); each must divide `fine_steps`.
    pub time_steps: Vec<usize>,
    /// Reference step count `M0` (`k0 = T/M0`).
    pub fine_steps: usize,
    pub reference_n: usize,
    pub realizations: usize,
    pub master_seed: u64,
    pub coupling: CouplingMode,
    pub noise: NoiseModel,
    pub truncation: u32,
    pub scaling: IncrementScaling,
    pub final_time: f64,
    pub viscosity: f64,
    pub forcing: [f64; 2],
    pub solve: SolveConfig,
}

impl StudySpec {
    /// `(N, M)` of every coarse level, in declaration order.
    pub fn levels(&self) -> Result<Vec<(usize, usize)>> {
        match self.coupling {
            CouplingMode::FixedH => Ok(self
                .mesh_sizes
                .iter()
                .flat_map(|&n| self.time_steps.iter().map(move |&m| (n, m)))
                .collect()),
            CouplingMode::BalancedHk | CouplingMode::BalancedHsqrtk => {
                if self.mesh_sizes.len() != self.time_steps.len() {
                    return Err(Error::invalid(
                        "balanced coupling pairs mesh_sizes and time_steps element by element; lengths differ",
                    ));
                }
                Ok(self
                    .mesh_sizes
                    .iter()
                    .copied()
                    .zip(self.time_steps.iter().copied())
                    .collect())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::invalid("at least one realization is required"));
        }
        if self.fine_steps == 0 || self.reference_n == 0 || self.truncation == 0 {
            return Err(Error::invalid(
                "fine_steps, reference_n and truncation must be positive",
            ));
        }
        let levels = self.levels()?;
        if levels.is_empty() {
            return Err(Error::invalid("the study has no coarse levels"));
        }
        for &(n, m) in &levels {
            if n == 0 || m == 0 {
                return Err(Error::invalid(
                    "mesh sizes and step counts must be positive",
                ));
            }
            if !self.fine_steps.is_multiple_of(m) {
                return Err(Error::NonDivisibleFactor {
                    factor: self.fine_steps / m.max(1),
                    steps: self.fine_steps,
                });
            }
            if self.coupling == CouplingMode::FixedH && n > self.reference_n {
                return Err(Error::invalid(
                    "reference mesh must be at least as fine as every coarse mesh",
                ));
            }
        }
        self.scheme_config(self.fine_steps).validate()
    }

    pub fn scheme_config(&self, steps: usize) -> SchemeConfig {
        SchemeConfig {
            steps,
            final_time: self.final_time,
            viscosity: self.viscosity,
            forcing: Forcing::Constant(self.forcing),
            noise: self.noise,
            variant: self.variant,
            solve: self.solve,
        }
    }

    pub fn realization_seed(&self, index: usize) -> u64 {
        mix64(self.master_seed, index as u64)
    }
}

/// Source of wall-clock time; the core crate has none of its own.
pub trait Clock: Sync {
    fn seconds(&self) -> f64;
}

/// A clock that always reads zero.
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

struct Level {
    n_cells: usize,
    steps: usize,
    stepper: ChorinStepper,
    basis: usize,
}

/// Everything shared read-only between realizations.
pub struct StudyContext {
    spec: StudySpec,
    qspec: QWienerSpec,
    reference_disc: Arc<Discretization>,
    reference: ChorinStepper,
    reference_basis: usize,
    reference_checkpoints: Vec<usize>,
    bases: Vec<NoiseBasis>,
    levels: Vec<Level>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelErrors {
    pub velocity: VelocityErrors,
    pub pressure: PressureErrors,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationOutcome {
    pub index: usize,
    pub levels: Vec<LevelErrors>,
}

impl StudyContext {
    pub fn new(spec: StudySpec, factory: &dyn PreconditionerFactory) -> Result<Self> {
        spec.validate()?;
        let qspec = QWienerSpec::new(spec.truncation)?;
        let mut discs: Vec<Arc<Discretization>> = Vec::new();
        let mut bases = Vec::new();
        let mut disc_for = |n: usize| -> Result<usize> {
            if let Some(i) = discs.iter().position(|d| d.mesh.n_cells() == n) {
                return Ok(i);
            }
            let d = Discretization::new(n)?;
            bases.push(NoiseBasis::new(&qspec, &d.mesh));
            discs.push(Arc::new(d));
            Ok(discs.len() - 1)
        };
        let reference_basis = disc_for(spec.reference_n)?;
        let mut level_ids = Vec::new();
        for (n, m) in spec.levels()? {
            level_ids.push((n, m, disc_for(n)?));
        }
        let reference_disc = discs[reference_basis].clone();
        let reference = ChorinStepper::new(
            reference_disc.clone(),
            spec.scheme_config(spec.fine_steps),
            factory,
        )?;
        let levels = level_ids
            .into_iter()
            .map(|(n, m, id)| {
                Ok(Level {
                    n_cells: n,
                    steps: m,
                    stepper: ChorinStepper::new(discs[id].clone(), spec.scheme_config(m), factory)?,
                    basis: id,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let finest = levels.iter().map(|l| l.steps).max().unwrap_or(1);
        let stride = spec.fine_steps / finest;
        let reference_checkpoints = (0..=spec.fine_steps).step_by(stride).collect();
        Ok(Self {
            spec,
            qspec,
            reference_disc,
            reference,
            reference_basis,
            reference_checkpoints,
            bases,
            levels,
        })
    }

    pub fn spec(&self) -> &StudySpec {
        &self.spec
    }

    /// `(N, M)` of each level in evaluation order.
    pub fn level_keys(&self) -> Vec<(usize, usize)> {
        self.levels.iter().map(|l| (l.n_cells, l.steps)).collect()
    }

    pub fn sample_path(&self, index: usize) -> Result<BrownianPath> {
        sample_brownian_path(
            &self.qspec,
            self.spec.fine_steps,
            self.spec.final_time,
            self.spec.realization_seed(index),
            self.spec.scaling,
        )
    }

    pub fn run_realization(&self, index: usize, clock: &dyn Clock) -> Result<RealizationOutcome> {
        let path = self.sample_path(index)?;
        let zero = |disc: &Discretization| VectorField::zeros(disc.mesh.n_vertices());
        let reference = run_trajectory(
            &self.reference,
            path.increments(),
            &self.bases[self.reference_basis],
            zero(&self.reference_disc),
            &self.reference_checkpoints,
            StoragePolicy::FullFields,
        )?;
        let mut levels = Vec::with_capacity(self.levels.len());
        for level in &self.levels {
            let start = clock.seconds();
            let table = path.coarsen(self.spec.fine_steps / level.steps)?;
            let all: Vec<usize> = (0..=level.steps).collect();
            let record = run_trajectory(
                &level.stepper,
                &table,
                &self.bases[level.basis],
                zero(level.stepper.discretization()),
                &all,
                StoragePolicy::FullFields,
            )?;
            let velocity = velocity_error_norms(&reference, &record, &self.reference_disc)?;
            let pressure = pressure_error_norm(&reference, &record, &self.reference_disc)?;
            levels.push(LevelErrors {
                velocity,
                pressure,
                seconds: clock.seconds() - start,
            });
        }
        Ok(RealizationOutcome { index, levels })
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (zero below two samples).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            libm::sqrt(self.variance() / self.count as f64)
        }
    }
}

/// `(sqrt(mean), delta-method standard error of sqrt(mean))`
fn root_with_error(w: &Welford) -> (f64, f64) {
    let root = libm::sqrt(w.mean().max(0.0));
    let se = if root > 0.0 {
        w.std_error() / (2.0 * root)
    } else {
        0.0
    };
    (root, se)
}

#[derive(Debug, Clone, Default)]
struct LevelAccumulator {
    velocity_sq: Vec<Welford>,
    gradsum_sq: Vec<Welford>,
    velocity_av: Welford,
    pressure_av: Welford,
    seconds: f64,
}

impl LevelAccumulator {
    fn push(&mut self, e: &LevelErrors) {
        if self.velocity_sq.is_empty() {
            self.velocity_sq = vec![Welford::default(); e.velocity.squared.len()];
            self.gradsum_sq = vec![Welford::default(); e.velocity.gradsum_squared.len()];
        }
        for (w, &x) in self.velocity_sq.iter_mut().zip(&e.velocity.squared) {
            w.push(x);
        }
        for (w, &x) in self.gradsum_sq.iter_mut().zip(&e.velocity.gradsum_squared) {
            w.push(x);
        }
        self.velocity_av.push(e.velocity.time_averaged_squared());
        self.pressure_av.push(e.pressure.time_averaged_squared());
        self.seconds += e.seconds;
    }

    /// Largest root-mean over checkpoints, with the error of that checkpoint.
    fn max_over(ws: &[Welford]) -> (f64, f64) {
        ws.iter().map(root_with_error).fold(
            (0.0, 0.0),
            |best, cur| if cur.0 > best.0 { cur } else { best },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub variant: Variant,
    pub n_cells: usize,
    pub h: f64,
    pub steps: usize,
    pub k: f64,
    pub realizations: usize,
    pub e_u_max: f64,
    pub e_u_av: f64,
    pub e_gradsum: f64,
    pub e_p_av: f64,
    pub se_u_max: f64,
    pub se_u_av: f64,
    pub se_gradsum: f64,
    pub se_p_av: f64,
    pub wall_time_s: f64,
}

impl StudyRow {
    pub fn norm(&self, name: &str) -> Option<f64> {
        match name {
            "e_u_max" => Some(self.e_u_max),
            "e_u_av" => Some(self.e_u_av),
            "e_gradsum" => Some(self.e_gradsum),
            "e_p_av" => Some(self.e_p_av),
            _ => None,
        }
    }
}

pub const NORM_NAMES: [&str; 4] = ["e_u_max", "e_u_av", "e_gradsum", "e_p_av"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRate {
    /// Mesh resolution of the fitted rows, or `None` for a balanced sweep.
    pub n_cells: Option<usize>,
    pub norm: String,
    pub fit: RateFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub code_version: String,
    pub spec_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub rates: Vec<FittedRate>,
    pub failures: usize,
    pub first_failure: Option<String>,
    pub provenance: Provenance,
}

impl StudyReport {
    pub fn rate(&self, norm: &str, n_cells: Option<usize>) -> Option<&RateFit> {
        self.rates
            .iter()
            .find(|r| r.norm == norm && r.n_cells == n_cells)
            .map(|r| &r.fit)
    }
}

/// Folds realization outcomes, in the order pushed, into the study report.
pub struct StudyAccumulator {
    keys: Vec<(usize, usize)>,
    levels: Vec<LevelAccumulator>,
    total: usize,
    failures: usize,
    first_failure: Option<String>,
}

impl StudyAccumulator {
    pub fn new(ctx: &StudyContext) -> Self {
        let keys = ctx.level_keys();
        Self {
            levels: vec![LevelAccumulator::default(); keys.len()],
            keys,
            total: 0,
            failures: 0,
            first_failure: None,
        }
    }

    pub fn push(&mut self, outcome: Result<RealizationOutcome>) {
        self.total += 1;
        match outcome {
            Ok(o) => {
                for (acc, e) in self.levels.iter_mut().zip(&o.levels) {
                    acc.push(e);
                }
            }
            Err(e) => {
                self.failures += 1;
                if self.first_failure.is_none() {
                    self.first_failure = Some(e.to_string());
                }
            }
        }
    }

    pub fn finish(self, spec: &StudySpec) -> Result<StudyReport> {
        if self.failures * 20 > self.total || self.failures == self.total {
            return Err(Error::TooManyFailures {
                failed: self.failures,
                total: self.total,
            });
        }
        let mut rows: Vec<StudyRow> = self
            .keys
            .iter()
            .zip(&self.levels)
            .map(|(&(n, m), acc)| {
                let (e_u_max, se_u_max) = LevelAccumulator::max_over(&acc.velocity_sq);
                let (e_gradsum, se_gradsum) = LevelAccumulator::max_over(&acc.gradsum_sq);
                let (e_u_av, se_u_av) = root_with_error(&acc.velocity_av);
                let (e_p_av, se_p_av) = root_with_error(&acc.pressure_av);
                StudyRow {
                    variant: spec.variant,
                    n_cells: n,
                    h: 1.0 / n as f64,
                    steps: m,
                    k: spec.final_time / m as f64,
                    realizations: acc.velocity_av.count(),
                    e_u_max,
                    e_u_av,
                    e_gradsum,
                    e_p_av,
                    se_u_max,
                    se_u_av,
                    se_gradsum,
                    se_p_av,
                    wall_time_s: acc.seconds,
                }
            })
            .collect();
        rows.sort_by(|a, b| a.steps.cmp(&b.steps).then(a.n_cells.cmp(&b.n_cells)));
        let rates = fit_rates(&rows, spec.coupling);
        Ok(StudyReport {
            rows,
            rates,
            failures: self.failures,
            first_failure: self.first_failure,
            provenance: Provenance {
                master_seed: spec.master_seed,
                code_version: env!("CARGO_PKG_VERSION").to_string(),
                spec_hash: None,
            },
        })
    }
}

/// Per-mesh fits for fixed-h sweeps, one fit over all rows for balanced ones.
/// Groups with fewer than three rows, or with a zero error, are skipped.
pub fn fit_rates(rows: &[StudyRow], coupling: CouplingMode) -> Vec<FittedRate> {
    let mut groups: Vec<(Option<usize>, Vec<&StudyRow>)> = Vec::new();
    for row in rows {
        let key = (coupling == CouplingMode::FixedH).then_some(row.n_cells);
        match groups.iter_mut().find(|(g, _)| *g == key) {
            Some((_, members)) => members.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    let mut out = Vec::new();
    for (key, members) in groups {
        if members.len() < 3 {
            continue;
        }
        for name in NORM_NAMES {
            let points: Vec<(f64, f64)> = members
                .iter()
                .map(|r| (r.k, r.norm(name).unwrap_or(0.0)))
                .collect();
            if let Ok(fit) = fit_rate(&points) {
                out.push(FittedRate {
                    n_cells: key,
                    norm: name.to_string(),
                    fit,
                });
            }
        }
    }
    out
}

/// Single-threaded study.
pub fn run_convergence_study(
    spec: &StudySpec,
    factory: &dyn PreconditionerFactory,
) -> Result<StudyReport> {
    let ctx = StudyContext::new(spec.clone(), factory)?;
    let mut acc = StudyAccumulator::new(&ctx);
    for i in 0..spec.realizations {
        acc.push(ctx.run_realization(i, &NoClock));
    }
    acc.finish(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25];
        let mut w = Welford::default();
        xs.iter().for_each(|&x| w.push(x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((w.mean() - mean).abs() < 1e-14);
        assert!((w.variance() - var).abs() < 1e-13);
        assert!((w.std_error() - libm::sqrt(var / 5.0)).abs() < 1e-14);
    }

    #[test]
    fn balanced_levels_zip() {
        let mut spec = crate::test_support::tiny_spec();
        spec.coupling = CouplingMode::BalancedHk;
        spec.mesh_sizes = vec![2, 4];
        spec.time_steps = vec![2, 4];
        assert_eq!(spec.levels().unwrap(), vec![(2, 2), (4, 4)]);
        spec.time_steps = vec![2];
        assert!(spec.levels().is_err());
        spec.coupling = CouplingMode::FixedH;
        assert_eq!(spec.levels().unwrap().len(), 2);
    }

    #[test]
    fn validation() {
        let mut spec = crate::test_support::tiny_spec();
        assert!(spec.validate().is_ok());
        spec.time_steps = vec![3];
        assert!(matches!(
            spec.validate(),
            Err(Error::NonDivisibleFactor { .. })
        ));
        let mut spec = crate::test_support::tiny_spec();
        spec.realizations = 0;
        assert!(spec.validate().is_err());
        let mut spec = crate::test_support::tiny_spec();
        spec.mesh_sizes = vec![8];
        assert!(spec.validate().is_err());
    }
}
