//! Desk-scale acceptance studies. Each check runs one study (or suite) and
//! returns a verdict with the numbers it was judged on.

use std::sync::Arc;
use std::time::Instant;

use chorin_cli::runner::run_study;
use chorin_cli::spectral::SpectralFactory;
use chorin_core::experiments::{CouplingMode, StudyReport, StudySpec};
use chorin_core::fem::{Discretization, SolveConfig, VectorField};
use chorin_core::scheme::{run_trajectory, ChorinStepper, SchemeConfig, StoragePolicy, Variant};
use chorin_core::stochastic::{
    sample_brownian_path, IncrementScaling, NoiseBasis, NoiseModel, QWienerSpec,
};
use chorin_core::validation::run_invariant_suite;

pub const SEED: u64 = 42;

pub type Check = fn() -> Result<Verdict, String>;

pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

pub fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

#[allow(clippy::too_many_arguments)]
fn study(
    variant: Variant,
    coupling: CouplingMode,
    mesh_sizes: Vec<usize>,
    time_steps: Vec<usize>,
    fine_steps: usize,
    reference_n: usize,
    realizations: usize,
    coefficient: f64,
) -> StudySpec {
    StudySpec {
        variant,
        mesh_sizes,
        time_steps,
        fine_steps,
        reference_n,
        realizations,
        master_seed: SEED,
        coupling,
        noise: NoiseModel::SqrtPlusOne { coefficient },
        truncation: 2,
        scaling: IncrementScaling::SqrtStep,
        final_time: 1.0,
        viscosity: 1.0,
        forcing: [1.0, 1.0],
        solve: SolveConfig::default(),
    }
}

fn run(spec: &StudySpec) -> Result<StudyReport, String> {
    run_study(spec, &SpectralFactory, 0).map_err(|e| e.to_string())
}

fn slope(report: &StudyReport, norm: &str, n_cells: Option<usize>) -> f64 {
    report.rate(norm, n_cells).map_or(f64::NAN, |f| f.slope)
}

fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&x)
}

fn table(report: &StudyReport, norm: &str) -> String {
    report
        .rows
        .iter()
        .map(|r| format!("k=1/{} {:.4e}", r.steps, r.norm(norm).unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join(", ")
}

const LOW: (f64, f64) = (0.13, 0.40);
const HALF: (f64, f64) = (0.35, 0.65);

pub fn standard_temporal_rate() -> Result<Verdict, String> {
    let spec = study(Variant::Standard, CouplingMode::FixedH, vec![32], vec![16, 32, 64, 128], 1024, 32, 100, 10.0);
    let r = run(&spec)?;
    let (u, p) = (slope(&r, "e_u_av", Some(32)), slope(&r, "e_p_av", Some(32)));
    Ok(verdict(
        within(u, LOW) && within(p, LOW),
        format!("slope e_u_av {u:.3}, e_p_av {p:.3}, want both in {LOW:?}"),
    ))
}

pub fn modified_temporal_rate() -> Result<Verdict, String> {
    let spec = study(Variant::Modified, CouplingMode::FixedH, vec![32], vec![16, 32, 64, 128], 1024, 32, 100, 1.0);
    let r = run(&spec)?;
    let (u, p) = (slope(&r, "e_u_max", Some(32)), slope(&r, "e_p_av", Some(32)));
    Ok(verdict(
        within(u, HALF) && within(p, HALF),
        format!("slope e_u_max {u:.3}, e_p_av {p:.3}, want both in {HALF:?}"),
    ))
}

pub fn small_step_growth(variant: Variant, coefficient: f64) -> Result<Verdict, String> {
    let steps = vec![32, 64, 128, 256, 512, 1024];
    let spec = study(variant, CouplingMode::FixedH, vec![16], steps, 2048, 32, 50, coefficient);
    let r = run(&spec)?;
    let errors: Vec<f64> = r.rows.iter().map(|row| row.e_u_av).collect();
    let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let last = *errors.last().unwrap();
    Ok(verdict(
        last >= 1.25 * min,
        format!("e_u_av at k=1/1024 is {:.3}× the sweep minimum, want ≥ 1.25 [{}]", last / min, table(&r, "e_u_av")),
    ))
}

pub fn balanced_standard() -> Result<Verdict, String> {
    let spec = study(Variant::Standard, CouplingMode::BalancedHk, vec![4, 8, 16, 32], vec![4, 8, 16, 32], 256, 64, 50, 10.0);
    let r = run(&spec)?;
    let u = slope(&r, "e_u_av", None);
    Ok(verdict(within(u, LOW), format!("h≈k slope e_u_av {u:.3}, want in {LOW:?} [{}]", table(&r, "e_u_av"))))
}

pub fn balanced_modified() -> Result<Verdict, String> {
    let spec = study(Variant::Modified, CouplingMode::BalancedHsqrtk, vec![4, 8, 16], vec![16, 64, 256], 1024, 32, 50, 1.0);
    let r = run(&spec)?;
    let u = slope(&r, "e_u_max", None);
    Ok(verdict(within(u, HALF), format!("h≈√k slope e_u_max {u:.3}, want in {HALF:?} [{}]", table(&r, "e_u_max"))))
}

pub fn noise_free_degenerate() -> Result<Verdict, String> {
    let n = 8;
    let steps = 32;
    let disc = Arc::new(Discretization::new(n).map_err(|e| e.to_string())?);
    let q = QWienerSpec::new(2).map_err(|e| e.to_string())?;
    let basis = NoiseBasis::new(&q, &disc.mesh);
    let mut identical = true;
    for variant in [Variant::Standard, Variant::Modified] {
        let stepper = ChorinStepper::new(disc.clone(), SchemeConfig::new(variant, steps, NoiseModel::Zero), &SpectralFactory)
            .map_err(|e| e.to_string())?;
        let trajectory = |seed| {
            let path = sample_brownian_path(&q, steps, 1.0, seed, IncrementScaling::SqrtStep)?;
            let all: Vec<usize> = (0..=steps).collect();
            run_trajectory(&stepper, path.increments(), &basis, VectorField::zeros(n * n), &all, StoragePolicy::FullFields)
        };
        let a = trajectory(1).map_err(|e| e.to_string())?;
        let b = trajectory(0xdead_beef).map_err(|e| e.to_string())?;
        identical &= a == b;
    }
    let mut spec = study(Variant::Standard, CouplingMode::FixedH, vec![8], vec![4, 8, 16], 32, 16, 8, 0.0);
    spec.noise = NoiseModel::Zero;
    let a = run(&spec)?;
    spec.master_seed = 7;
    let b = run(&spec)?;
    let same_rows = a.rows.iter().zip(&b.rows).all(|(x, y)| {
        (x.e_u_max, x.e_u_av, x.e_gradsum, x.e_p_av) == (y.e_u_max, y.e_u_av, y.e_gradsum, y.e_p_av)
    });
    let spread: f64 = a
        .rows
        .iter()
        .flat_map(|r| [r.se_u_max, r.se_u_av, r.se_gradsum, r.se_p_av])
        .fold(0.0, f64::max);
    Ok(verdict(
        identical && same_rows && spread == 0.0,
        format!("trajectories identical {identical}, study rows identical {same_rows}, largest standard error {spread:e}"),
    ))
}

pub fn invariant_suite() -> Result<Verdict, String> {
    let start = Instant::now();
    let outcomes = run_invariant_suite(&SpectralFactory);
    let seconds = start.elapsed().as_secs_f64();
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    Ok(verdict(
        failed.is_empty() && seconds <= 120.0,
        format!("{} checks, failed {:?}, {seconds:.1} s (limit 120 s)", outcomes.len(), failed),
    ))
}

/// Runs the checks whose names contain one of `filter` (all when empty),
/// printing one PASS/FAIL line each. Returns the number of failures.
pub fn run_checks(checks: &[(&str, Check)], filter: &[String]) -> usize {
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = check().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("{tag} [{name}] {} ({:.0} s)", v.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!v.passed);
    }
    failed
}
