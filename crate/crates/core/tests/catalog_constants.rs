mod common;

use pathsde::models::{admissible_horizon, builtin_model, overrides, Theorem};

#[test]
fn catalog_constants_hold_on_random_samples() {
    common::verify_catalog_constants(2024);
}

#[test]
fn segment_invariants_hold_on_seeded_samples() {
    common::verify_segment_invariants(11, 200);
}

fn t_max(name: &str, kv: &[(&str, &str)], theorem: Theorem) -> f64 {
    let model = builtin_model(name, &overrides(kv)).unwrap();
    admissible_horizon(&model, theorem)
        .unwrap()
        .t_max
        .unwrap_or(f64::INFINITY)
}

#[test]
fn horizon_shrinks_as_constants_grow() {
    let cs = ["0.05", "0.1", "0.2", "0.4", "0.8"];
    for theorem in [Theorem::Th1, Theorem::Th2] {
        let by_c: Vec<f64> = cs
            .iter()
            .map(|c| t_max("holder-supnorm", &[("c", c)], theorem))
            .collect();
        assert!(by_c.windows(2).all(|w| w[1] <= w[0]), "{theorem}: {by_c:?}");
        let by_sigma: Vec<f64> = ["0.25", "0.5", "1", "2"]
            .iter()
            .map(|s| t_max("holder-supnorm", &[("sigma", s)], theorem))
            .collect();
        assert!(
            by_sigma.windows(2).all(|w| w[1] <= w[0]),
            "{theorem}: {by_sigma:?}"
        );
    }
    let inf: Vec<f64> = cs
        .iter()
        .map(|c| t_max("infinite-exp", &[("c", c)], Theorem::Th3))
        .collect();
    assert!(inf.windows(2).all(|w| w[1] <= w[0]), "{inf:?}");
    let grad: Vec<f64> = cs
        .iter()
        .map(|c| t_max("gradient-gaussian", &[("cz", c)], Theorem::Th5))
        .collect();
    assert!(grad.windows(2).all(|w| w[1] <= w[0]), "{grad:?}");
}
