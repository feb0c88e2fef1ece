//! Q-Wiener sampling, multiplicative noise and the discrete Helmholtz decomposition.

mod helmholtz;
mod noise;
mod qwiener;
pub mod rng;

pub use helmholtz::{
    helmholtz_decompose, helmholtz_decompose_with, solve_potential, HelmholtzResult,
};
pub use noise::{evaluate_noise, CustomNoise, NoiseModel};
pub use qwiener::{
    sample_brownian_path, BrownianPath, IncrementScaling, IncrementTable, NoiseBasis, QWienerMode,
    QWienerSpec, INCREMENT_QUANTUM,
};
pub use rng::{mix64, NormalStream};
