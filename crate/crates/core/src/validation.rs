//! Invariant suite run before any study.
//!
//! Every check returns a [`CheckOutcome`]; solver or setup errors turn into
//! failed checks rather than aborting the suite.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;

use crate::error::Result;
use crate::fem::{
    interpolate_vector, l2_norm, load_scalar, norm2, solve_spd_with, Discretization,
    PreconditionerFactory, ScalarField, SolveConfig, VectorField,
};
use crate::scheme::{divergence_residual, ChorinStepper, SchemeConfig, Variant};
use crate::stochastic::{
    helmholtz_decompose_with, sample_brownian_path, solve_potential, IncrementScaling, NoiseBasis, NoiseModel,
    NormalStream, QWienerSpec,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn from_result(name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self {
                name,
                passed,
                detail,
            },
            Err(e) => Self {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        }
    }
}

pub const DIVERGENCE_TOL: f64 = 1e-9;
pub const ORTHOGONALITY_TOL: f64 = 1e-9;
pub const ASSEMBLY_TOL: f64 = 1e-14;
pub const ENERGY_SLACK: f64 = 1e-12;
pub const POISSON_SLOPE: (f64, f64) = (1.8, 2.2);

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = NormalStream::new(seed);
    (0..n).map(|_| rng.next_normal()).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(libm::fabs(*x)))
}

/// Stiffness annihilates constants; mass rows sum to `h²` and the total mass is 1.
pub fn check_assembly(n_cells: usize) -> Result<(bool, String)> {
    let disc = Discretization::new(n_cells)?;
    let ops = &disc.ops;
    let n = disc.mesh.n_vertices();
    let h2 = disc.mesh.h() * disc.mesh.h();
    let kernel_s = max_abs(&ops.stiff_s.mul_vec(&vec![1.0; n]));
    let kernel_v = max_abs(&ops.stiff_v.mul_vec(&vec![1.0; 2 * n]));
    let rows = ops.mass_s.mul_vec(&vec![1.0; n]);
    let row_dev = rows.iter().fold(0.0f64, |m, r| m.max(libm::fabs(r - h2)));
    let total = libm::fabs(rows.iter().sum::<f64>() - 1.0);
    let worst = kernel_s.max(kernel_v).max(row_dev).max(total);
    Ok((
        worst <= ASSEMBLY_TOL,
        format!("kernel {kernel_s:.1e}/{kernel_v:.1e}, mass row {row_dev:.1e}, total {total:.1e}"),
    ))
}

/// Summed increments agree bit for bit per mode and under nested coarsening.
pub fn check_coupling(seed: u64) -> Result<(bool, String)> {
    let spec = QWienerSpec::new(3)?;
    let path = sample_brownian_path(&spec, 96, 1.0, seed, IncrementScaling::SqrtStep)?;
    let fine = path.increments().totals();
    let mut ok = true;
    for factor in [2, 3, 4, 8, 12, 32, 96] {
        ok &= path.coarsen(factor)?.totals() == fine;
    }
    ok &= path.coarsen(2)?.coarsen(4)? == path.coarsen(8)?;
    ok &= path.coarsen(4)?.coarsen(2)? == path.coarsen(8)?;
    Ok((ok, "factors 2..96 on 96 fine steps".to_string()))
}

/// `(η, ∇φ) = 0` for a random load, and decomposing `η` again gives `ζ = 0`.
pub fn check_helmholtz(
    n_cells: usize,
    factory: &dyn PreconditionerFactory,
    seed: u64,
) -> Result<(bool, String)> {
    let disc = Discretization::new(n_cells)?;
    let ops = &disc.ops;
    let cfg = SolveConfig::default();
    let pc = factory.build(&disc.mesh, &ops.stiff_s, 1);
    let load = VectorField::new(random_vector(2 * disc.mesh.n_vertices(), seed));
    let d = helmholtz_decompose_with(ops, &load, &cfg, pc.as_ref())?;
    let scale = norm2(&ops.divergence.mul_vec(&load.coeffs));
    let orth = norm2(&d.orthogonality_residual(ops)) / scale;

    // η only exists through its loads, so decompose it again at that level:
    // its divergence load is the orthogonality residual.
    let mut eta_div = d.orthogonality_residual(ops);
    let drift = eta_div.iter().sum::<f64>() / eta_div.len() as f64;
    eta_div.iter_mut().for_each(|v| *v -= drift);
    let (again, _) = solve_potential(ops, &eta_div, &cfg, pc.as_ref())?;
    let zeta = l2_norm(&d.potential, ops)?;
    let idem = if zeta > 0.0 {
        l2_norm(&again, ops)? / zeta
    } else {
        0.0
    };
    Ok((
        orth <= ORTHOGONALITY_TOL && idem <= 10.0 * cfg.rel_tol.max(1e-9),
        format!("orthogonality {orth:.1e}, idempotence {idem:.1e}"),
    ))
}

/// `|(ũ, ∇φ) − k(∇p, ∇φ)| ≤ tol·‖ũ‖` after each of 64 noisy steps on N=8.
pub fn check_divergence_identity(
    variant: Variant,
    factory: &dyn PreconditionerFactory,
    seed: u64,
) -> Result<(bool, String)> {
    let steps = 64;
    let disc = Arc::new(Discretization::new(8)?);
    let cfg = SchemeConfig::new(variant, steps, NoiseModel::SqrtPlusOne { coefficient: 1.0 });
    let stepper = ChorinStepper::new(disc.clone(), cfg, factory)?;
    let spec = QWienerSpec::new(2)?;
    let basis = NoiseBasis::new(&spec, &disc.mesh);
    let path = sample_brownian_path(
        &spec,
        steps,
        cfg.final_time,
        seed,
        IncrementScaling::SqrtStep,
    )?;
    let mut state = stepper.initial_state(VectorField::zeros(disc.mesh.n_vertices()))?;
    let mut worst = 0.0f64;
    for m in 0..steps {
        let dw = basis.increment_field(path.increments().row(m))?;
        stepper.step(&mut state, &dw).map_err(|e| e.at_step(m))?;
        let res = divergence_residual(
            &disc.ops,
            &state.u_tilde,
            &state.pressure,
            stepper.step_size(),
        );
        let u = l2_norm(&state.u_tilde, &disc.ops)?;
        worst = worst.max(norm2(&res) / u);
    }
    Ok((
        worst <= DIVERGENCE_TOL,
        format!("{} worst relative residual {worst:.1e}", variant.name()),
    ))
}

fn manufactured_error(n_cells: usize, factory: &dyn PreconditionerFactory) -> Result<f64> {
    let disc = Discretization::new(n_cells)?;
    let exact = |x: [f64; 2]| libm::sin(2.0 * PI * x[0]) * libm::sin(2.0 * PI * x[1]);
    let rhs = load_scalar(&disc.mesh, |x| 8.0 * PI * PI * exact(x));
    let cfg = SolveConfig {
        rel_tol: 1e-13,
        ..SolveConfig::default()
    }
    .deflated();
    let pc = factory.build(&disc.mesh, &disc.ops.stiff_s, 1);
    let mut u = vec![0.0; disc.mesh.n_vertices()];
    solve_spd_with(&disc.ops.stiff_s, &rhs, &mut u, &cfg, pc.as_ref())?;
    disc.ops.remove_mean(&mut u);
    Ok(l2_error_quadrature(&disc, &u, exact))
}

/// Seven-point degree-5 rule on each triangle.
fn l2_error_quadrature(disc: &Discretization, u: &[f64], exact: impl Fn([f64; 2]) -> f64) -> f64 {
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_3;
    const W0: f64 = 0.225;
    const W1: f64 = 0.132_394_152_788_506_2;
    const W2: f64 = 0.125_939_180_544_827_2;
    let rule = [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ];
    let mut sum = 0.0;
    for (t, tri) in disc.mesh.triangles().iter().enumerate() {
        let c = disc.mesh.triangle_corners(t);
        let area = libm::fabs(disc.mesh.signed_area(t));
        for (bary, w) in rule {
            let x = [
                bary[0] * c[0][0] + bary[1] * c[1][0] + bary[2] * c[2][0],
                bary[0] * c[0][1] + bary[1] * c[1][1] + bary[2] * c[2][1],
            ];
            let uh = bary[0] * u[tri[0]] + bary[1] * u[tri[1]] + bary[2] * u[tri[2]];
            let e = uh - exact(x);
            sum += w * area * e * e;
        }
    }
    libm::sqrt(sum)
}

/// Observed L² order of the periodic Poisson solve against `sin(2πx)sin(2πy)`.
pub fn check_poisson_order(factory: &dyn PreconditionerFactory) -> Result<(bool, String)> {
    let sizes = [8usize, 16, 32, 64];
    let mut points = Vec::new();
    for n in sizes {
        points.push((1.0 / n as f64, manufactured_error(n, factory)?));
    }
    let slope = crate::experiments::fit_rate(&points)?.slope;
    Ok((
        (POISSON_SLOPE.0..=POISSON_SLOPE.1).contains(&slope),
        format!("slope {slope:.3}"),
    ))
}

/// Without noise or forcing, `‖ũⁿ‖` does not increase.
pub fn check_energy_decay(
    variant: Variant,
    factory: &dyn PreconditionerFactory,
) -> Result<(bool, String)> {
    let steps = 32;
    let disc = Arc::new(Discretization::new(8)?);
    let mut cfg = SchemeConfig::new(variant, steps, NoiseModel::Zero);
    cfg.forcing = crate::scheme::Forcing::Constant([0.0, 0.0]);
    cfg.solve.rel_tol = 1e-14;
    let stepper = ChorinStepper::new(disc.clone(), cfg, factory)?;
    let initial = interpolate_vector(&disc.mesh, |x| {
        [
            libm::sin(2.0 * PI * x[1]) + 0.5 * libm::cos(2.0 * PI * x[0]),
            libm::cos(4.0 * PI * x[0]) * libm::sin(2.0 * PI * x[1]),
        ]
    });
    let mut state = stepper.initial_state(initial)?;
    let dw = ScalarField::zeros(disc.mesh.n_vertices());
    let mut prev = l2_norm(&state.u_tilde, &disc.ops)?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..steps {
        stepper.step(&mut state, &dw)?;
        let cur = l2_norm(&state.u_tilde, &disc.ops)?;
        worst = worst.max(cur - prev);
        prev = cur;
    }
    Ok((
        worst <= ENERGY_SLACK,
        format!("{} largest increase {worst:.1e}", variant.name()),
    ))
}

/// Under zero noise both schemes produce identical states.
pub fn check_variant_agreement(factory: &dyn PreconditionerFactory) -> Result<(bool, String)> {
    let steps = 16;
    let disc = Arc::new(Discretization::new(8)?);
    let run = |variant| -> Result<_> {
        let stepper = ChorinStepper::new(
            disc.clone(),
            SchemeConfig::new(variant, steps, NoiseModel::Zero),
            factory,
        )?;
        let initial = interpolate_vector(&disc.mesh, |x| {
            [libm::sin(2.0 * PI * x[1]), libm::sin(2.0 * PI * x[0])]
        });
        let mut state = stepper.initial_state(initial)?;
        let dw = ScalarField::zeros(disc.mesh.n_vertices());
        for _ in 0..steps {
            stepper.step(&mut state, &dw)?;
        }
        Ok(state)
    };
    let a = run(Variant::Standard)?;
    let b = run(Variant::Modified)?;
    Ok((a == b, format!("{steps} steps on N=8")))
}

/// Without noise, different seeds drive bit-identical trajectories.
pub fn check_noise_free_determinism(factory: &dyn PreconditionerFactory) -> Result<(bool, String)> {
    let steps = 16;
    let disc = Arc::new(Discretization::new(8)?);
    let spec = QWienerSpec::new(2)?;
    let basis = NoiseBasis::new(&spec, &disc.mesh);
    let stepper = ChorinStepper::new(
        disc.clone(),
        SchemeConfig::new(Variant::Standard, steps, NoiseModel::Zero),
        factory,
    )?;
    let run = |seed| -> Result<_> {
        let path = sample_brownian_path(&spec, steps, 1.0, seed, IncrementScaling::SqrtStep)?;
        let mut state = stepper.initial_state(VectorField::zeros(disc.mesh.n_vertices()))?;
        for m in 0..steps {
            stepper.step(
                &mut state,
                &basis.increment_field(path.increments().row(m))?,
            )?;
        }
        Ok(state)
    };
    Ok((
        run(1)? == run(0xdead_beef)?,
        "seeds 1 and 0xdeadbeef".to_string(),
    ))
}

/// Runs every invariant check.
pub fn run_invariant_suite(factory: &dyn PreconditionerFactory) -> Vec<CheckOutcome> {
    let seed = 0x5eed;
    vec![
        CheckOutcome::from_result("assembly_kernel_and_partition", check_assembly(8)),
        CheckOutcome::from_result("increment_coupling_exact", check_coupling(seed)),
        CheckOutcome::from_result("helmholtz_orthogonality", check_helmholtz(8, factory, seed)),
        CheckOutcome::from_result(
            "divergence_identity_standard",
            check_divergence_identity(Variant::Standard, factory, seed),
        ),
        CheckOutcome::from_result(
            "divergence_identity_modified",
            check_divergence_identity(Variant::Modified, factory, seed),
        ),
        CheckOutcome::from_result("poisson_l2_order", check_poisson_order(factory)),
        CheckOutcome::from_result(
            "energy_decay_standard",
            check_energy_decay(Variant::Standard, factory),
        ),
        CheckOutcome::from_result(
            "energy_decay_modified",
            check_energy_decay(Variant::Modified, factory),
        ),
        CheckOutcome::from_result(
            "modified_equals_standard_without_noise",
            check_variant_agreement(factory),
        ),
        CheckOutcome::from_result(
            "noise_free_determinism",
            check_noise_free_determinism(factory),
        ),
    ]
}
