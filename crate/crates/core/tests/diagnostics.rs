use pathsde::diagnostics::{
    displacement_scaling, exponential_moment_sweep, lyapunov_bounds_check, lyapunov_grid_check,
    mu0_integrability, DisplacementConfig, QuadratureConfig, SegmentOperator, Verdict,
};
use pathsde::girsanov::NovikovQuantity;
use pathsde::models::{builtin_model, overrides, InitialSegment, SdeModel};
use pathsde::montecarlo::Execution;

fn model(name: &str, kv: &[(&str, &str)]) -> SdeModel {
    builtin_model(name, &overrides(kv)).unwrap()
}

fn gaussian_linear() -> SdeModel {
    model(
        "gradient-gaussian",
        &[("cv", "1"), ("cz", "1"), ("alpha", "1")],
    )
}

#[test]
fn mu0_matches_the_gaussian_closed_form() {
    let g = gaussian_linear();
    for kappa in [0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
        let r = mu0_integrability(&g, kappa, &QuadratureConfig::default()).unwrap();
        let exact = 1.0 / (1.0 - kappa).sqrt();
        let value = r.value.expect("finite");
        assert!(
            (value - exact).abs() <= 1e-6,
            "kappa {kappa}: {value} vs {exact}"
        );
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.tail_bound <= 1e-10 * value);
    }
}

#[test]
fn mu0_reports_divergence_at_and_beyond_the_critical_exponent() {
    let g = gaussian_linear();
    for kappa in [1.0, 1.1, 2.0] {
        let r = mu0_integrability(&g, kappa, &QuadratureConfig::default()).unwrap();
        assert!(r.diverged, "kappa {kappa}");
        assert!(r.value.is_none());
        assert_eq!(r.verdict, Verdict::Fail);
    }
}

#[test]
fn mu0_is_finite_for_sublinear_functionals() {
    let g = model(
        "gradient-gaussian",
        &[("alpha", "0.5"), ("cz", "1"), ("d", "2")],
    );
    for kappa in [0.5, 2.0, 10.0] {
        let r = mu0_integrability(&g, kappa, &QuadratureConfig::default()).unwrap();
        assert!(
            !r.diverged && r.value.is_some(),
            "kappa {kappa}: {:?}",
            r.notes
        );
    }
}

#[test]
fn lyapunov_sandwich_holds_for_admissible_weights() {
    for (a, b, g) in [
        (1.0, 1.0, 0.0),
        (3.0, 1.0, 1.2),
        (0.5, 2.0, -0.9),
        (4.0, 4.0, 15.9),
    ] {
        let r = lyapunov_bounds_check(a, b, g, 5000, 7).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "({a}, {b}, {g}): {:?}", r.notes);
    }
    assert!(lyapunov_bounds_check(1.0, 1.0, 1.0, 10, 0).is_err());
}

#[test]
fn lyapunov_grid_passes() {
    let r = lyapunov_grid_check(20, 4.0, 10, 3).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.rows);
    assert_eq!(r.rows[0]["points"], 8000);
}

#[test]
fn displacement_ratios_stay_bounded_on_regular_models() {
    for name in ["zero-drift", "holder-supnorm"] {
        let r = displacement_scaling(
            &model(name, &[]),
            4.0,
            &[8, 16, 32, 64],
            1.0,
            3000,
            3,
            &DisplacementConfig::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{name}: {:?}", r.notes);
        let ops: Vec<SegmentOperator> = r
            .rows
            .iter()
            .map(|row| serde_json::from_value(row["operator"].clone()).unwrap())
            .collect();
        assert!(
            ops.contains(&SegmentOperator::Interpolated)
                && ops.contains(&SegmentOperator::Truncated)
        );
    }
}

#[test]
fn displacement_flags_a_discontinuous_initial_segment() {
    let m = model("holder-supnorm", &[])
        .with_initial(InitialSegment::Step {
            before: vec![0.0],
            after: vec![3.0],
            jump_at: -0.3,
        })
        .unwrap();
    let r = displacement_scaling(
        &m,
        4.0,
        &[8, 16, 32, 64],
        0.5,
        2000,
        3,
        &DisplacementConfig::default(),
    )
    .unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
}

#[test]
fn displacement_rejects_bad_inputs() {
    let m = model("zero-drift", &[]);
    let cfg = DisplacementConfig::default();
    assert!(displacement_scaling(&m, 1.0, &[8, 16], 1.0, 100, 1, &cfg).is_err());
    assert!(displacement_scaling(
        &model("infinite-exp", &[]),
        4.0,
        &[8, 16],
        1.0,
        100,
        1,
        &cfg
    )
    .is_err());
}

#[test]
fn moment_sweep_below_threshold_is_stable() {
    let r = exponential_moment_sweep(
        &model("zero-drift", &[]),
        NovikovQuantity::SegmentNorm,
        1.0,
        16,
        &[0.0, 0.05, 0.1],
        8000,
        5,
        Execution::parallel(),
    )
    .unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.notes);
    assert_eq!(r.rows[0]["estimate"]["mean"], 1.0);
}

#[test]
fn verdicts_are_deterministic() {
    let m = model("holder-supnorm", &[]);
    let cfg = DisplacementConfig {
        execution: Execution::Parallel { threads: Some(3) },
        ..DisplacementConfig::default()
    };
    let a = displacement_scaling(&m, 4.0, &[8, 16], 1.0, 500, 9, &cfg).unwrap();
    let b = displacement_scaling(
        &m,
        4.0,
        &[8, 16],
        1.0,
        500,
        9,
        &DisplacementConfig::default(),
    )
    .unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.verdict, b.verdict);
    let g = gaussian_linear();
    let x = mu0_integrability(&g, 0.4, &QuadratureConfig::default()).unwrap();
    let y = mu0_integrability(&g, 0.4, &QuadratureConfig::default()).unwrap();
    assert_eq!(x, y);
}
