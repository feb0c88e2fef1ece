//! Run configuration: TOML file, named presets, `key=value` overrides.
//!
//! ```toml
//! preset = "fig5_1"          # optional; the file then only needs the keys it changes
//!
//! [study]
//! variant = "standard"       # standard | modified
//! coupling = "fixed_h"       # fixed_h | balanced_hk | balanced_hsqrtk
//! mesh_sizes = [32]          # coarse N (h = 1/N)
//! k = [0.0625, 0.03125]      # coarse time steps; T/k must be an integer
//! k0 = 0.0009765625          # reference time step; must divide every k
//! reference_n = 32
//! realizations = 100
//! master_seed = 42
//! final_time = 1.0
//!
//! [physics]
//! viscosity = 1.0
//! forcing = [1.0, 1.0]
//!
//! [noise]
//! kind = "sqrt_plus_one"     # zero | sqrt_plus_one
//! coefficient = 10.0
//! truncation = 2             # modes (j, l) in {1..J}²
//! increment_scaling = "sqrt_k"   # sqrt_k | k
//!
//! [solver]
//! rel_tol = 1e-10
//! max_iter = 10000
//! preconditioner = "spectral"    # spectral | jacobi | none
//!
//! [output]
//! dir = "out"
//! dump_paths = 0             # realizations whose increments are written out
//! ```
//!
//! Unknown keys are rejected everywhere. Overrides use dotted keys
//! (`noise.coefficient=1`, `study.k=[0.5,0.25]`) and are applied after the
//! file has been read.

use std::path::Path;

use chorin_core::experiments::{CouplingMode, StudySpec};
use chorin_core::fem::SolveConfig;
use chorin_core::scheme::Variant;
use chorin_core::stochastic::{IncrementScaling, NoiseModel};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub variant: Variant,
    pub coupling: CouplingMode,
    pub mesh_sizes: Vec<usize>,
    pub k: Vec<f64>,
    pub k0: f64,
    pub reference_n: usize,
    pub realizations: usize,
    pub master_seed: u64,
    pub final_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub viscosity: f64,
    pub forcing: [f64; 2],
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            viscosity: 1.0,
            forcing: [1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Zero,
    SqrtPlusOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    pub coefficient: f64,
    pub truncation: u32,
    pub increment_scaling: IncrementScaling,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            kind: NoiseKind::SqrtPlusOne,
            coefficient: 1.0,
            truncation: 2,
            increment_scaling: IncrementScaling::SqrtStep,
        }
    }
}

impl NoiseSection {
    pub fn model(&self) -> NoiseModel {
        match self.kind {
            NoiseKind::Zero => NoiseModel::Zero,
            NoiseKind::SqrtPlusOne => NoiseModel::SqrtPlusOne {
                coefficient: self.coefficient,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    Spectral,
    Jacobi,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveConfig::default();
        Self {
            rel_tol: d.rel_tol,
            max_iter: d.max_iter,
            preconditioner: PreconditionerKind::Spectral,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub dump_paths: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            dump_paths: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub study: StudySection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Number of steps `T/k`, rejecting steps that do not tile `[0, T]`.
pub fn step_count(final_time: f64, k: f64) -> Result<usize, CliError> {
    if !(k > 0.0 && final_time > 0.0) {
        return Err(CliError::config(format!("time step {k} and final time {final_time} must be positive")));
    }
    let m = (final_time / k).round();
    if m < 1.0 || ((m * k) - final_time).abs() > 1e-9 * final_time {
        return Err(CliError::config(format!("time step {k} does not divide the final time {final_time}")));
    }
    Ok(m as usize)
}

impl RunConfig {
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            rel_tol: self.solver.rel_tol,
            max_iter: self.solver.max_iter,
            ..SolveConfig::default()
        }
    }

    pub fn study_spec(&self) -> Result<StudySpec, CliError> {
        let s = &self.study;
        let time_steps = s
            .k
            .iter()
            .map(|&k| step_count(s.final_time, k))
            .collect::<Result<Vec<_>, _>>()?;
        let spec = StudySpec {
            variant: s.variant,
            mesh_sizes: s.mesh_sizes.clone(),
            time_steps,
            fine_steps: step_count(s.final_time, s.k0)?,
            reference_n: s.reference_n,
            realizations: s.realizations,
            master_seed: s.master_seed,
            coupling: s.coupling,
            noise: self.noise.model(),
            truncation: self.noise.truncation,
            scaling: self.noise.increment_scaling,
            final_time: s.final_time,
            viscosity: self.physics.viscosity,
            forcing: self.physics.forcing,
            solve: self.solve_config(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Shrinks the realization count and the number of refinement levels by
    /// `scale ∈ (0, 1]`. At least three levels (or all, if fewer) are kept,
    /// coarsest first, and the reference keeps its distance below the finest
    /// kept level.
    pub fn scaled(mut self, scale: f64) -> Result<Self, CliError> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(CliError::config(format!("scale must lie in (0, 1], got {scale}")));
        }
        if scale == 1.0 {
            return Ok(self);
        }
        let s = &mut self.study;
        s.realizations = ((s.realizations as f64 * scale).ceil() as usize).max(2);

        let levels = s.k.len();
        let keep = ((levels as f64 * scale).ceil() as usize).clamp(levels.min(3), levels);
        let mut k = s.k.clone();
        k.sort_by(|a, b| b.total_cmp(a));
        let finest_before = k[levels - 1];
        let finest_after = k[keep - 1];
        let ratio = finest_before / s.k0;
        s.k0 = finest_after / ratio;

        if s.coupling != CouplingMode::FixedH {
            // mesh_sizes pair with k element by element
            let mut pairs: Vec<(f64, usize)> = s.k.iter().copied().zip(s.mesh_sizes.iter().copied()).collect();
            pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
            pairs.truncate(keep);
            let finest_n_before = *s.mesh_sizes.iter().max().unwrap_or(&1);
            let finest_n_after = pairs.iter().map(|p| p.1).max().unwrap_or(1);
            s.reference_n = (s.reference_n * finest_n_after).div_ceil(finest_n_before).max(finest_n_after);
            s.k = pairs.iter().map(|p| p.0).collect();
            s.mesh_sizes = pairs.iter().map(|p| p.1).collect();
        } else {
            k.truncate(keep);
            s.k = k;
        }
        Ok(self)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration always serializes")
    }
}

pub const PRESETS: [&str; 6] = ["fig5_1", "fig5_3", "fig5_4", "fig5_5", "fig5_6", "fig5_7"];

fn dyadic(from: u32, to: u32) -> Vec<f64> {
    (from..=to).map(|e| 1.0 / f64::from(1u32 << e)).collect()
}

/// Full-size study definitions. `scale` shrinks them to desk size.
pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    let standard = |coefficient: f64| NoiseSection {
        coefficient,
        ..NoiseSection::default()
    };
    let study = |variant, coupling, mesh_sizes: Vec<usize>, k: Vec<f64>, k0: f64, reference_n, realizations| StudySection {
        variant,
        coupling,
        mesh_sizes,
        k,
        k0,
        reference_n,
        realizations,
        master_seed: 42,
        final_time: 1.0,
    };
    let (study, noise) = match name {
        // temporal rate of the standard scheme on one mesh
        "fig5_1" => (
            study(Variant::Standard, CouplingMode::FixedH, vec![50], dyadic(4, 8), 1.0 / 4096.0, 50, 500),
            standard(10.0),
        ),
        // fixed coarse mesh, shrinking k
        "fig5_3" => (
            study(Variant::Standard, CouplingMode::FixedH, vec![20], dyadic(5, 10), 1.0 / 4096.0, 50, 500),
            standard(10.0),
        ),
        // h ≈ k
        "fig5_4" => (
            study(
                Variant::Standard,
                CouplingMode::BalancedHk,
                vec![8, 16, 32, 64],
                dyadic(3, 6),
                1.0 / 4096.0,
                128,
                500,
            ),
            standard(10.0),
        ),
        "fig5_5" => (
            study(Variant::Modified, CouplingMode::FixedH, vec![50], dyadic(4, 8), 1.0 / 4096.0, 50, 800),
            standard(1.0),
        ),
        "fig5_6" => (
            study(Variant::Modified, CouplingMode::FixedH, vec![20], dyadic(5, 10), 1.0 / 4096.0, 50, 800),
            standard(1.0),
        ),
        // h ≈ √k
        "fig5_7" => (
            study(
                Variant::Modified,
                CouplingMode::BalancedHsqrtk,
                vec![4, 8, 16, 32],
                dyadic(4, 10).into_iter().step_by(2).collect(),
                1.0 / 4096.0,
                64,
                800,
            ),
            standard(1.0),
        ),
        other => {
            return Err(CliError::config(format!(
                "unknown preset `{other}` (available: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(RunConfig {
        study,
        physics: PhysicsSection::default(),
        noise,
        solver: SolverSection::default(),
        output: OutputSection::default(),
    })
}

fn merge(base: &mut Table, top: Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string (`study.variant=modified`).
fn parse_value(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{assignment}` is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(format!("override key `{key}` is malformed")));
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("override key `{key}` descends into a non-table")))?;
    }
    node.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Builds the effective configuration: preset (from the argument or the
/// file's `preset` key), then the file, then the overrides.
pub fn load(preset_name: Option<&str>, file: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut file_table = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => Table::new(),
    };
    let file_preset = match file_table.remove("preset") {
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(CliError::config("`preset` must be a string")),
        None => None,
    };
    let mut table = match preset_name.map(str::to_string).or(file_preset) {
        Some(name) => Table::try_from(preset(&name)?).expect("presets serialize to tables"),
        None => Table::new(),
    };
    merge(&mut table, file_table);
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    from_table(table)
}

pub fn from_table(table: Table) -> Result<RunConfig, CliError> {
    RunConfig::deserialize(Value::Table(table)).map_err(|e| CliError::config(format!("configuration: {e}")))
}

pub fn from_toml_str(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::config(format!("configuration: {e}")))
}
