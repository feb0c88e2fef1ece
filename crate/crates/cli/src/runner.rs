//! Parallel execution of a study over realizations.
//!
//! Realizations run on a rayon pool; their outcomes are collected by index
//! and folded into the accumulators in index order, so the report does not
//! depend on the thread count.

use std::time::Instant;

use chorin_core::experiments::{Clock, StudyAccumulator, StudyContext, StudyReport, StudySpec};
use chorin_core::fem::{IdentityFactory, PreconditionerFactory};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{PreconditionerKind, RunConfig};
use crate::error::CliError;
use crate::spectral::{JacobiFactory, SpectralFactory};

/// Environment variable holding the default worker count (0 = all cores).
pub const THREADS_ENV: &str = "CHORIN_THREADS";

pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub fn factory(kind: PreconditionerKind) -> &'static dyn PreconditionerFactory {
    match kind {
        PreconditionerKind::Spectral => &SpectralFactory,
        PreconditionerKind::Jacobi => &JacobiFactory,
        PreconditionerKind::None => &IdentityFactory,
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {threads} worker threads: {e}")))
}

/// Runs all realizations of `spec` on `threads` workers (0 = all cores).
pub fn run_study(spec: &StudySpec, factory: &dyn PreconditionerFactory, threads: usize) -> Result<StudyReport, CliError> {
    let ctx = StudyContext::new(spec.clone(), factory)?;
    let clock = WallClock::new();
    let outcomes: Vec<_> = pool(threads)?.install(|| {
        (0..spec.realizations)
            .into_par_iter()
            .map(|i| {
                let out = ctx.run_realization(i, &clock);
                if let Err(e) = &out {
                    log::warn!("realization {i} failed: {e}");
                }
                out
            })
            .collect()
    });
    let mut acc = StudyAccumulator::new(&ctx);
    for o in outcomes {
        acc.push(o);
    }
    Ok(acc.finish(spec)?)
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the study described by `cfg` and stamps the report with the config hash.
pub fn run_config(cfg: &RunConfig, threads: usize) -> Result<StudyReport, CliError> {
    let spec = cfg.study_spec()?;
    log::info!(
        "{} study: {} levels, {} realizations, reference N={} M0={}",
        spec.variant.name(),
        spec.levels()?.len(),
        spec.realizations,
        spec.reference_n,
        spec.fine_steps
    );
    let mut report = run_study(&spec, factory(cfg.solver.preconditioner), threads)?;
    report.provenance.spec_hash = Some(config_hash(cfg));
    Ok(report)
}
