use alloc::vec;

use crate::experiments::{CouplingMode, StudySpec};
use crate::fem::SolveConfig;
use crate::scheme::Variant;
use crate::stochastic::{IncrementScaling, NoiseModel};

pub fn tiny_spec() -> StudySpec {
    StudySpec {
        variant: Variant::Standard,
        mesh_sizes: vec![4],
        time_steps: vec![2, 4],
        fine_steps: 8,
        reference_n: 4,
        realizations: 2,
        master_seed: 1,
        coupling: CouplingMode::FixedH,
        noise: NoiseModel::SqrtPlusOne { coefficient: 1.0 },
        truncation: 2,
        scaling: IncrementScaling::SqrtStep,
        final_time: 1.0,
        viscosity: 1.0,
        forcing: [1.0, 1.0],
        solve: SolveConfig::default(),
    }
}
