//! Monte Carlo convergence studies against fine-grid reference solutions.

mod norms;
mod rate;
mod study;

pub use norms::{
    pressure_error_norm, prolong, velocity_error_norms, PressureErrors, VelocityErrors, MEAN_GUARD,
};
pub use rate::{fit_rate, RateFit};
pub use study::{
    fit_rates, run_convergence_study, Clock, CouplingMode, FittedRate, LevelErrors, NoClock,
    Provenance, RealizationOutcome, StudyAccumulator, StudyContext, StudyReport, StudyRow,
    StudySpec, Welford, NORM_NAMES,
};
