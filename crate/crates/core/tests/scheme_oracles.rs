mod common;

use std::sync::Arc;

use chorin_core::experiments::{pressure_error_norm, velocity_error_norms};
use chorin_core::fem::{Discretization, IdentityFactory, ScalarField, SolveConfig, VectorField};
use chorin_core::scheme::{Checkpoint, ChorinStepper, SchemeConfig, StoragePolicy, TrajectoryRecord, Variant};
use chorin_core::stochastic::NoiseModel;
use chorin_core::Error;
use common::{bordered_solve, dense_ops, lu_solve, matvec, quad, refine_nested, transpose, TestRng};

fn tight() -> SolveConfig {
    SolveConfig {
        rel_tol: 1e-14,
        ..SolveConfig::default()
    }
}

fn stepper(n: usize, variant: Variant, steps: usize, noise: NoiseModel) -> ChorinStepper {
    let mut cfg = SchemeConfig::new(variant, steps, noise);
    cfg.solve = tight();
    ChorinStepper::new(Arc::new(Discretization::new(n).unwrap()), cfg, &IdentityFactory).unwrap()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol, "{what}[{i}]: {x} vs {y}");
    }
}

#[test]
fn first_standard_step_matches_dense_lu() {
    let (n, k) = (2, 0.25);
    let s = stepper(n, Variant::Standard, 4, NoiseModel::Zero);
    let mut state = s.initial_state(VectorField::zeros(n * n)).unwrap();
    s.step(&mut state, &ScalarField::zeros(n * n)).unwrap();

    let d = dense_ops(n);
    let a: Vec<Vec<f64>> = (0..2 * n * n)
        .map(|i| (0..2 * n * n).map(|j| d.mass_v[i][j] + k * d.stiff_v[i][j]).collect())
        .collect();
    let rhs: Vec<f64> = matvec(&d.mass_v, &vec![1.0; 2 * n * n]).iter().map(|v| k * v).collect();
    let u = lu_solve(&a, &rhs);
    assert_close(&state.u_tilde.coeffs, &u, 1e-10, "velocity");
    assert_close(&u, &vec![k; 2 * n * n], 1e-12, "constant solution");
    assert!(state.pressure.coeffs.iter().all(|p| p.abs() <= 1e-10));
}

/// Full standard and modified steps from random data against dense solves.
#[test]
fn noisy_steps_match_dense_oracle() {
    let (n, steps) = (3, 8);
    let k = 1.0 / steps as f64;
    let c = 1.5;
    let noise = NoiseModel::SqrtPlusOne { coefficient: c };
    let d = dense_ops(n);
    let nv = n * n;
    let w = matvec(&d.mass, &vec![1.0; nv]);
    let mut rng = TestRng::new(3);
    let u0 = rng.vec(2 * nv);
    let mut p0 = rng.vec(nv);
    let mean = p0.iter().sum::<f64>() / nv as f64;
    p0.iter_mut().for_each(|p| *p -= mean);
    let dw = rng.vec(nv);

    let g: Vec<f64> = (0..2 * nv).map(|i| c * (u0[i] * u0[i] + 1.0).sqrt() * dw[i / 2]).collect();
    let a: Vec<Vec<f64>> = (0..2 * nv)
        .map(|i| (0..2 * nv).map(|j| d.mass_v[i][j] + k * d.stiff_v[i][j]).collect())
        .collect();
    let div = transpose(&d.grad);
    let momentum = |load: &[f64], p: &[f64]| {
        let mu = matvec(&d.mass_v, &u0);
        let gp = matvec(&d.grad, p);
        let mf = matvec(&d.mass_v, &vec![1.0; 2 * nv]);
        let rhs: Vec<f64> = (0..2 * nv).map(|i| mu[i] - k * gp[i] + k * mf[i] + load[i]).collect();
        let u1 = lu_solve(&a, &rhs);
        let b: Vec<f64> = matvec(&div, &u1).iter().map(|v| v / k).collect();
        (u1.clone(), bordered_solve(&d.stiff, &w, &b))
    };

    for variant in [Variant::Standard, Variant::Modified] {
        let s = stepper(n, variant, steps, noise);
        let mut state = s.initial_state(VectorField::new(u0.clone())).unwrap();
        state.pressure = ScalarField::zero_mean(p0.clone());
        s.step(&mut state, &ScalarField::new(dw.clone())).unwrap();

        let (u1, p1, r1) = match variant {
            Variant::Standard => {
                let (u1, p1) = momentum(&matvec(&d.mass_v, &g), &p0);
                (u1, p1.clone(), p1)
            }
            Variant::Modified => {
                let zeta = bordered_solve(&d.stiff, &w, &matvec(&div, &g));
                let mg = matvec(&d.mass_v, &g);
                let gz = matvec(&d.grad, &zeta);
                let load: Vec<f64> = mg.iter().zip(&gz).map(|(a, b)| a - b).collect();
                let (u1, r1) = momentum(&load, &p0);
                let p1 = r1.iter().zip(&zeta).map(|(r, z)| r + z / k).collect();
                (u1, p1, r1)
            }
        };
        assert_close(&state.u_tilde.coeffs, &u1, 1e-10, "velocity");
        assert_close(&state.pressure.coeffs, &r1, 1e-10, "pressure solve");
        assert_close(&state.recovered_pressure.coeffs, &p1, 1e-9, "recovered pressure");
        let pk: Vec<f64> = p1.iter().map(|p| k * p).collect();
        assert_close(&state.p_time_integral.coeffs, &pk, 1e-10, "accumulator");
    }
}

fn record(n: usize, steps: usize, u: Vec<Vec<f64>>, p: Vec<Vec<f64>>) -> TrajectoryRecord {
    let k = 1.0 / steps as f64;
    TrajectoryRecord {
        policy: StoragePolicy::FullFields,
        steps,
        step_size: k,
        n_cells: n,
        checkpoints: u
            .into_iter()
            .zip(p)
            .enumerate()
            .map(|(m, (u, p))| Checkpoint {
                step: m,
                time: m as f64 * k,
                u_norm: 0.0,
                p_integral_norm: 0.0,
                u_tilde: Some(VectorField::new(u)),
                pressure: None,
                p_time_integral: Some(ScalarField::zero_mean(p)),
                r_time_integral: None,
            })
            .collect(),
    }
}

fn zero_mean(mut v: Vec<f64>) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
    v
}

/// Random records: reference with 8 steps on `ref_n`, coarse with 4 steps on
/// `coarse_n`; every norm recomputed densely.
fn compare_norms(ref_n: usize, coarse_n: usize, seed: u64) {
    let (m_ref, m) = (8, 4);
    let mut rng = TestRng::new(seed);
    let nr = ref_n * ref_n;
    let nc = coarse_n * coarse_n;
    let ru: Vec<Vec<f64>> = (0..=m_ref).map(|_| rng.vec(2 * nr)).collect();
    let rp: Vec<Vec<f64>> = (0..=m_ref).map(|_| zero_mean(rng.vec(nr))).collect();
    let cu: Vec<Vec<f64>> = (0..=m).map(|_| rng.vec(2 * nc)).collect();
    let cp: Vec<Vec<f64>> = (0..=m).map(|_| zero_mean(rng.vec(nc))).collect();

    let disc = Discretization::new(ref_n).unwrap();
    let reference = record(ref_n, m_ref, ru.clone(), rp.clone());
    let coarse = record(coarse_n, m, cu.clone(), cp.clone());
    let v = velocity_error_norms(&reference, &coarse, &disc).unwrap();
    let p = pressure_error_norm(&reference, &coarse, &disc).unwrap();

    let d = dense_ops(ref_n);
    let k = 1.0 / m as f64;
    let lift = |x: &Vec<f64>, comps: usize| {
        if coarse_n == ref_n {
            x.clone()
        } else {
            refine_nested(x, comps, coarse_n)
        }
    };
    let (mut max_u, mut av_u, mut max_grad, mut av_p) = (0.0f64, 0.0, 0.0f64, 0.0);
    let mut running = vec![0.0; 2 * nr];
    for step in 0..=m {
        let du: Vec<f64> = ru[2 * step].iter().zip(lift(&cu[step], 2)).map(|(a, b)| a - b).collect();
        let dp: Vec<f64> = rp[2 * step].iter().zip(lift(&cp[step], 1)).map(|(a, b)| a - b).collect();
        let eu = quad(&d.mass_v, &du);
        max_u = max_u.max(eu);
        for (s, x) in running.iter_mut().zip(&du) {
            *s += k * x;
        }
        max_grad = max_grad.max(quad(&d.stiff_v, &running));
        if step > 0 {
            av_u += k * eu;
            av_p += k * quad(&d.mass, &dp);
        }
    }
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    assert!(rel(v.e_u_max(), max_u.sqrt()) < 1e-12);
    assert!(rel(v.e_u_av(), av_u.sqrt()) < 1e-12);
    assert!(rel(v.e_gradsum(), max_grad.sqrt()) < 1e-12);
    assert!(rel(p.e_p_av(), av_p.sqrt()) < 1e-12);
}

#[test]
fn error_norms_match_dense_bruteforce_on_shared_mesh() {
    compare_norms(4, 4, 21);
}

#[test]
fn error_norms_match_dense_bruteforce_across_meshes() {
    compare_norms(8, 4, 22);
}

#[test]
fn constant_offset_norms() {
    let n = 4;
    let base: Vec<Vec<f64>> = (0..=4).map(|m| vec![m as f64; 2 * n * n]).collect();
    let shifted: Vec<Vec<f64>> = base
        .iter()
        .map(|u| u.iter().enumerate().map(|(i, x)| x + if i % 2 == 0 { 0.3 } else { -0.4 }).collect())
        .collect();
    let zeros = vec![vec![0.0; n * n]; 5];
    let disc = Discretization::new(n).unwrap();
    let v = velocity_error_norms(&record(n, 4, base, zeros.clone()), &record(n, 4, shifted, zeros), &disc).unwrap();
    assert!((v.e_u_max() - 0.5).abs() < 1e-14);
    assert!((v.e_u_av() - 0.5).abs() < 1e-14);
    // square root of a roundoff-level quadratic form
    assert!(v.e_gradsum() < 1e-7, "{}", v.e_gradsum());
}

#[test]
fn nonzero_mean_accumulator_is_rejected() {
    let n = 4;
    let u = vec![vec![0.0; 2 * n * n]; 5];
    let reference = record(n, 4, u.clone(), vec![vec![0.0; n * n]; 5]);
    let coarse = record(n, 4, u, vec![vec![1.0; n * n]; 5]);
    let err = pressure_error_norm(&reference, &coarse, &Discretization::new(n).unwrap()).unwrap_err();
    assert!(matches!(err, Error::NonZeroMean { .. }));
}

#[test]
fn mismatched_checkpoint_grids_are_rejected() {
    let n = 2;
    let u = |m: usize| vec![vec![0.0; 2 * n * n]; m + 1];
    let p = |m: usize| vec![vec![0.0; n * n]; m + 1];
    let disc = Discretization::new(n).unwrap();
    let reference = record(n, 6, u(6), p(6));
    let coarse = record(n, 4, u(4), p(4));
    assert!(matches!(
        velocity_error_norms(&reference, &coarse, &disc),
        Err(Error::CheckpointMismatch(_))
    ));
}
