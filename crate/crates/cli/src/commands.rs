//! Subcommand implementations, separated from argument parsing so they can
//! be driven from tests.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chorin_core::experiments::StudyContext;
use chorin_core::fem::{Discretization, VectorField};
use chorin_core::scheme::{run_trajectory, ChorinStepper, SchemeConfig, StoragePolicy, Variant};
use chorin_core::stochastic::{mix64, sample_brownian_path, NoiseBasis, QWienerSpec};
use chorin_core::validation::{run_invariant_suite, CheckOutcome};

use crate::config::{step_count, RunConfig};
use crate::error::CliError;
use crate::output::{self, Summary};
use crate::runner::{factory, run_config};

/// `run-study`: runs the study and writes its artifacts into `cfg.output.dir`.
pub fn run_study(cfg: &RunConfig, threads: usize) -> Result<Vec<PathBuf>, CliError> {
    let report = run_config(cfg, threads)?;
    let dir = PathBuf::from(&cfg.output.dir);
    let mut written = output::write_study(&dir, cfg, &report)?;
    if cfg.output.dump_paths > 0 {
        let spec = cfg.study_spec()?;
        let ctx = StudyContext::new(spec, factory(cfg.solver.preconditioner))?;
        for i in 0..cfg.output.dump_paths.min(cfg.study.realizations) {
            let path = dir.join(format!("path_{i:04}.csv"));
            output::write_path_dump(&path, &ctx, i)?;
            written.push(path);
        }
    }
    for r in &report.rates {
        log::info!(
            "rate {:<9} N={:<5} slope {:.3}",
            r.norm,
            r.n_cells.map_or("all".to_string(), |n| n.to_string()),
            r.fit.slope
        );
    }
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct SingleRun {
    pub variant: Variant,
    pub n_cells: usize,
    pub k: f64,
    pub seed: u64,
    pub dump_fields: bool,
}

/// `single-run`: one trajectory on its own Brownian path, recording every step.
pub fn single_run(cfg: &RunConfig, run: &SingleRun) -> Result<Vec<PathBuf>, CliError> {
    let steps = step_count(cfg.study.final_time, run.k)?;
    let disc = Arc::new(Discretization::new(run.n_cells)?);
    let scheme = SchemeConfig {
        steps,
        final_time: cfg.study.final_time,
        viscosity: cfg.physics.viscosity,
        forcing: chorin_core::scheme::Forcing::Constant(cfg.physics.forcing),
        noise: cfg.noise.model(),
        variant: run.variant,
        solve: cfg.solve_config(),
    };
    let stepper = ChorinStepper::new(disc.clone(), scheme, factory(cfg.solver.preconditioner))?;
    let q = QWienerSpec::new(cfg.noise.truncation)?;
    let basis = NoiseBasis::new(&q, &disc.mesh);
    let path = sample_brownian_path(
        &q,
        steps,
        cfg.study.final_time,
        mix64(run.seed, 0),
        cfg.noise.increment_scaling,
    )?;
    let checkpoints: Vec<usize> = (0..=steps).collect();
    let policy = if run.dump_fields {
        StoragePolicy::FullFields
    } else {
        StoragePolicy::NormsOnly
    };
    let record = run_trajectory(
        &stepper,
        path.increments(),
        &basis,
        VectorField::zeros(disc.mesh.n_vertices()),
        &checkpoints,
        policy,
    )?;
    let dir = PathBuf::from(&cfg.output.dir);
    output::ensure_dir(&dir)?;
    let mut written = vec![dir.join("trajectory.csv")];
    output::write_trajectory_norms(&written[0], &record)?;
    if run.dump_fields {
        let p = dir.join("fields.csv");
        output::write_field_dump(&p, &record, &disc)?;
        written.push(p);
    }
    let last = record.checkpoints.last().expect("step 0 is always recorded");
    log::info!(
        "{} N={} k={} seed={}: ‖ũ(T)‖ = {:.6e}, ‖P(T)‖ = {:.6e}",
        run.variant.name(),
        run.n_cells,
        run.k,
        run.seed,
        last.u_norm,
        last.p_integral_norm
    );
    Ok(written)
}

/// `validate`: the invariant suite; any failed check is an acceptance failure.
pub fn validate(cfg: &RunConfig) -> Result<Vec<CheckOutcome>, CliError> {
    let outcomes = run_invariant_suite(factory(cfg.solver.preconditioner));
    for o in &outcomes {
        println!("{:<4} {:<40} {}", if o.passed { "ok" } else { "FAIL" }, o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::Acceptance {
            failed,
            total: outcomes.len(),
        });
    }
    Ok(outcomes)
}

/// `plot-emit`: regenerates `plot.gp` from a study directory's `summary.json`.
pub fn plot_emit(input: &Path, output: Option<&Path>) -> Result<PathBuf, CliError> {
    let summary: Summary = output::read_summary(&input.join(output::SUMMARY_FILE))?;
    let target = output.map_or_else(|| input.join(output::PLOT_FILE), Path::to_path_buf);
    output::write_plot(&target, &summary)?;
    Ok(target)
}
