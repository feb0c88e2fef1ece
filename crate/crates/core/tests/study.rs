use chorin_core::experiments::{run_convergence_study, CouplingMode, StudySpec};
use chorin_core::fem::{IdentityFactory, SolveConfig};
use chorin_core::scheme::Variant;
use chorin_core::stochastic::{IncrementScaling, NoiseModel};
use chorin_core::Error;

fn spec() -> StudySpec {
    StudySpec {
        variant: Variant::Standard,
        mesh_sizes: vec![4],
        time_steps: vec![2, 4, 8],
        fine_steps: 16,
        reference_n: 4,
        realizations: 8,
        master_seed: 17,
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

#[test]
fn level_matching_the_reference_has_zero_error() {
    for variant in [Variant::Standard, Variant::Modified] {
        let mut s = spec();
        s.variant = variant;
        s.time_steps = vec![16];
        let report = run_convergence_study(&s, &IdentityFactory).unwrap();
        let row = &report.rows[0];
        for e in [row.e_u_max, row.e_u_av, row.e_gradsum, row.e_p_av] {
            assert_eq!(e, 0.0);
        }
    }
}

#[test]
fn rows_ordered_by_decreasing_step() {
    let mut s = spec();
    s.time_steps = vec![4, 2, 8];
    s.realizations = 2;
    let report = run_convergence_study(&s, &IdentityFactory).unwrap();
    let steps: Vec<usize> = report.rows.iter().map(|r| r.steps).collect();
    assert_eq!(steps, vec![2, 4, 8]);
    assert!(report.rows.windows(2).all(|w| w[0].k > w[1].k));
}

#[test]
fn rates_need_three_levels() {
    let mut s = spec();
    s.realizations = 2;
    let report = run_convergence_study(&s, &IdentityFactory).unwrap();
    assert!(report.rate("e_u_av", Some(4)).is_some());
    s.time_steps = vec![2, 4];
    let report = run_convergence_study(&s, &IdentityFactory).unwrap();
    assert!(report.rates.is_empty());
}

#[test]
fn studies_are_reproducible() {
    let a = run_convergence_study(&spec(), &IdentityFactory).unwrap();
    let b = run_convergence_study(&spec(), &IdentityFactory).unwrap();
    assert_eq!(a, b);
    let mut s = spec();
    s.master_seed = 18;
    let c = run_convergence_study(&s, &IdentityFactory).unwrap();
    assert_ne!(a.rows, c.rows);
}

#[test]
fn noise_free_study_has_no_spread() {
    let mut s = spec();
    s.noise = NoiseModel::Zero;
    let a = run_convergence_study(&s, &IdentityFactory).unwrap();
    s.master_seed = 12345;
    let b = run_convergence_study(&s, &IdentityFactory).unwrap();
    assert_eq!(a.rows, b.rows);
    for row in &a.rows {
        assert_eq!([row.se_u_max, row.se_u_av, row.se_gradsum, row.se_p_av], [0.0; 4]);
    }
}

/// A single 25-vs-100 ratio of a heavy-tailed statistic is itself very noisy,
/// so the median over independent master seeds is checked.
#[test]
fn standard_error_shrinks_like_root_n() {
    let mut ratios: Vec<f64> = (0..9)
        .map(|seed| {
            let mut s = spec();
            s.master_seed = seed;
            s.time_steps = vec![4];
            s.realizations = 25;
            let small = run_convergence_study(&s, &IdentityFactory).unwrap();
            s.realizations = 100;
            let large = run_convergence_study(&s, &IdentityFactory).unwrap();
            small.rows[0].se_u_av / large.rows[0].se_u_av
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!((1.6..=2.5).contains(&median), "median ratio {median} of {ratios:?}");
}

#[test]
fn halving_the_step_does_not_blow_up_the_estimate() {
    let mut s = spec();
    s.realizations = 16;
    let report = run_convergence_study(&s, &IdentityFactory).unwrap();
    for w in report.rows.windows(2) {
        assert!(w[1].e_u_av <= 2.0 * w[0].e_u_av);
        assert!(w[1].e_p_av <= 2.0 * w[0].e_p_av);
    }
}

#[test]
fn failing_solver_aborts_the_study() {
    let mut s = spec();
    s.solve.max_iter = 1;
    s.realizations = 4;
    match run_convergence_study(&s, &IdentityFactory) {
        Err(Error::TooManyFailures { failed, total }) => assert_eq!((failed, total), (4, 4)),
        other => panic!("expected an abort, got {other:?}"),
    }
}

#[test]
fn invalid_levels_are_rejected() {
    let mut s = spec();
    s.time_steps = vec![3];
    assert!(matches!(
        run_convergence_study(&s, &IdentityFactory),
        Err(Error::NonDivisibleFactor { .. })
    ));
    let mut s = spec();
    s.mesh_sizes = vec![8];
    assert!(run_convergence_study(&s, &IdentityFactory).is_err());
}

