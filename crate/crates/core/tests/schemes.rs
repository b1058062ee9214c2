use pathsde::models::{
    builtin_model, overrides, Constants, Functional, InitialSegment, LocalDrift, LyapunovConstants,
    Memory, SdeModel, Sigma,
};
use pathsde::rng::BrownianPath;
use pathsde::schemes::{
    grid_steps, hamiltonian_step, initial_trajectory, reference_solution, simulate, simulate_with,
    Route, SchemeKind,
};
use pathsde::segment::{interpolated_norm_bound_check, segment_norm, HistoryNorm, SegmentKind};

fn brownian(model: &SdeModel, m: usize, t: f64, seed: u64, path: u64) -> BrownianPath {
    let n = grid_steps(model.tau(), m, t).unwrap();
    BrownianPath::generate(seed, path, model.dim(), model.tau(), m, n)
}

fn model(name: &str, kv: &[(&str, &str)]) -> SdeModel {
    builtin_model(name, &overrides(kv)).unwrap()
}

/// Velocity part driven by pure noise: `b = 0`, `Z = 0`.
fn free_hamiltonian(sigma: f64) -> SdeModel {
    SdeModel::new(
        "free-hamiltonian",
        2,
        1.0,
        LocalDrift::Damped { a1: 0.0, a2: 0.0 },
        Functional::Zero,
        Sigma::scaled_identity(2, sigma),
        Memory::Hamiltonian,
        Constants::default(),
        InitialSegment::Constant(vec![0.3, -0.2, 0.7, 1.1]),
    )
    .unwrap()
}

#[test]
fn additive_noise_is_reproduced_exactly() {
    let m_fine = 64;
    let t = 2.0;
    let zd = model(
        "zero-drift",
        &[("d", "2"), ("sigma", "0.7"), ("x0", "0.25")],
    );
    let ham = free_hamiltonian(0.7);
    for path in 0..50 {
        let bm = brownian(&zd, m_fine, t, 17, path);
        for m in [4, 8, 16, 32, 64] {
            let factor = m_fine / m;
            for scheme in [SchemeKind::Interp, SchemeKind::Trunc] {
                let traj = simulate(&zd, scheme, m, t, &bm).unwrap();
                for k in 0..=traj.n_steps() {
                    let w = bm.value(k * factor);
                    let expect: Vec<f64> = w.iter().map(|wi| 0.25 + 0.7 * wi).collect();
                    assert_eq!(
                        traj.node(k as i64),
                        expect.as_slice(),
                        "{scheme:?} M = {m}, k = {k}"
                    );
                }
            }
            for scheme in [SchemeKind::Hamiltonian, SchemeKind::HamiltonianEuler] {
                let traj = simulate(&ham, scheme, m, t, &bm).unwrap();
                for k in 0..=traj.n_steps() {
                    let w = bm.value(k * factor);
                    let v = &traj.node(k as i64)[2..];
                    assert_eq!(
                        v,
                        &[0.7 + 0.7 * w[0], 1.1 + 0.7 * w[1]],
                        "{scheme:?} M = {m}, k = {k}"
                    );
                }
            }
        }
    }
}

#[test]
fn point_delay_on_the_grid_gives_identical_schemes() {
    let model = model("holder-point-delay", &[("lag", "0.5"), ("a", "-0.3")]);
    for path in 0..20 {
        let bm = brownian(&model, 32, 3.0, 5, path);
        for m in [2, 4, 8, 16, 32] {
            let a = simulate(&model, SchemeKind::Interp, m, 3.0, &bm).unwrap();
            let b = simulate(&model, SchemeKind::Trunc, m, 3.0, &bm).unwrap();
            assert_eq!(a.values(), b.values(), "M = {m}");
        }
    }
}

#[test]
fn simulation_is_a_pure_function_of_its_inputs() {
    for name in [
        "holder-supnorm",
        "infinite-exp",
        "hamiltonian-holder",
        "gradient-gaussian",
    ] {
        let model = model(name, &[]);
        let scheme = SchemeKind::reference_for(&model);
        let a = simulate(&model, scheme, 16, 2.0, &brownian(&model, 16, 2.0, 9, 3)).unwrap();
        let b = simulate(&model, scheme, 16, 2.0, &brownian(&model, 16, 2.0, 9, 3)).unwrap();
        assert_eq!(a, b, "{name}");
        let c = simulate(&model, scheme, 16, 2.0, &brownian(&model, 16, 2.0, 9, 4)).unwrap();
        assert_ne!(a, c, "{name}");
    }
}

#[test]
fn incremental_and_general_routes_agree() {
    for name in [
        "holder-point-delay",
        "holder-supnorm",
        "infinite-exp",
        "hamiltonian-holder",
        "gradient-gaussian",
    ] {
        let model = model(name, &[("alpha", "0.5")]);
        let bm = brownian(&model, 16, 2.0, 1, 0);
        let scheme = SchemeKind::reference_for(&model);
        let a = simulate_with(&model, scheme, 16, 2.0, &bm, Route::Incremental).unwrap();
        let b = simulate_with(&model, scheme, 16, 2.0, &bm, Route::General).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!(
                (x - y).abs() <= 1e-10 * (1.0 + x.abs()),
                "{name}: {x} vs {y}"
            );
        }
    }
}

#[test]
fn segment_bounds_hold_along_simulated_paths() {
    let model = model("holder-supnorm", &[("alpha", "0.5"), ("c", "0.5")]);
    let m = 16;
    for path in 0..10 {
        let traj = simulate(
            &model,
            SchemeKind::Trunc,
            m,
            4.0,
            &brownian(&model, m, 4.0, 2, path),
        )
        .unwrap();
        for k in 0..=traj.n_steps() as i64 {
            let exact = traj.segment(k, m, SegmentKind::LinearInterp).unwrap();
            for factor in [1, 2, 4] {
                let trunc = traj
                    .truncated_segment(k, factor, m, SegmentKind::LeftTruncated)
                    .unwrap();
                assert!(
                    segment_norm(&trunc, HistoryNorm::Sup).unwrap()
                        <= segment_norm(&exact, HistoryNorm::Sup).unwrap()
                );
                if k >= m as i64 {
                    assert!(interpolated_norm_bound_check(&traj, k, factor).unwrap());
                }
            }
        }
    }
}

#[test]
fn one_hamiltonian_step_integrates_the_position_exactly() {
    let model = SdeModel::new(
        "flow",
        1,
        1.0,
        LocalDrift::Damped { a1: 0.0, a2: 0.0 },
        Functional::Zero,
        Sigma::scaled_identity(1, 1.0),
        Memory::Hamiltonian,
        Constants::default(),
        InitialSegment::Constant(vec![0.0, 1.0]),
    )
    .unwrap();
    let traj = initial_trajectory(&model, 4, 1);
    let next = hamiltonian_step(&model, &traj, 0, &[0.0], false).unwrap();
    let delta: f64 = 0.25;
    assert!((next[0] - delta.exp_m1()).abs() < 1e-15);
    assert_eq!(next[1], 1.0);
}

/// Exact flow of `x' = x + y`, `y' = -a1 x - a2 y` by RK4 on a fine grid.
fn ode_reference(a1: f64, a2: f64, x0: f64, y0: f64, t: f64) -> (f64, f64) {
    let f = |x: f64, y: f64| (x + y, -a1 * x - a2 * y);
    let n = 200_000;
    let h = t / n as f64;
    let (mut x, mut y) = (x0, y0);
    for _ in 0..n {
        let k1 = f(x, y);
        let k2 = f(x + 0.5 * h * k1.0, y + 0.5 * h * k1.1);
        let k3 = f(x + 0.5 * h * k2.0, y + 0.5 * h * k2.1);
        let k4 = f(x + h * k3.0, y + h * k3.1);
        x += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        y += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    (x, y)
}

#[test]
fn noiseless_hamiltonian_scheme_converges_at_first_order() {
    let (a1, a2, t) = (3.0, 2.0, 2.0);
    let model = SdeModel::new(
        "deterministic",
        1,
        1.0,
        LocalDrift::Damped { a1, a2 },
        Functional::Zero,
        Sigma::scaled_identity(1, 0.0),
        Memory::Hamiltonian,
        Constants::default(),
        InitialSegment::Constant(vec![1.0, -0.5]),
    )
    .unwrap();
    let (x, y) = ode_reference(a1, a2, 1.0, -0.5, t);
    let mut errors = Vec::new();
    for m in [16, 32, 64, 128, 256] {
        let bm =
            BrownianPath::from_increments(1.0, m, 1, vec![0.0; grid_steps(1.0, m, t).unwrap()])
                .unwrap();
        let traj = simulate(&model, SchemeKind::Hamiltonian, m, t, &bm).unwrap();
        let s = traj.final_state();
        errors.push(((s[0] - x).powi(2) + (s[1] - y).powi(2)).sqrt());
    }
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.8..2.2).contains(&ratio), "error ratios {errors:?}");
    }
}

#[test]
fn reference_mean_matches_the_ornstein_uhlenbeck_law() {
    let model = model("ou-linear", &[]);
    let t = 1.0;
    let n = 20_000;
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let bm = brownian(&model, 256, t, 31, i);
            reference_solution(&model, t, &bm, 256)
                .unwrap()
                .final_state()[0]
        })
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let exact = (-t).exp();
    assert!(
        (mean - exact).abs() <= 3.0 * (var / n as f64).sqrt() + 2e-3,
        "{mean} vs {exact}"
    );
}

#[test]
fn lyapunov_function_does_not_grow_after_burn_in() {
    let model = model(
        "hamiltonian-holder",
        &[("c", "0.2"), ("x0", "2"), ("y0", "-1")],
    );
    let c = model.constants();
    let (la, lb, lg) = (
        c.lyap_alpha.unwrap(),
        c.lyap_beta.unwrap(),
        c.lyap_gamma.unwrap(),
    );
    LyapunovConstants::new(la, lb, lg).unwrap();
    let (m, t, n) = (64, 6.0, 4000);
    let checkpoints = [128usize, 192, 256, 320, 384];
    let mut samples = vec![Vec::with_capacity(n); checkpoints.len()];
    for i in 0..n {
        let traj = simulate(
            &model,
            SchemeKind::Hamiltonian,
            m,
            t,
            &brownian(&model, m, t, 8, i as u64),
        )
        .unwrap();
        for (s, &k) in samples.iter_mut().zip(&checkpoints) {
            let v = traj.node(k as i64);
            s.push(LyapunovConstants::w(la, lb, lg, &v[..1], &v[1..]));
        }
    }
    let stats: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| {
            let mean = s.iter().sum::<f64>() / n as f64;
            let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (mean, (var / n as f64).sqrt())
        })
        .collect();
    for w in stats.windows(2) {
        let ((m0, s0), (m1, s1)) = (w[0], w[1]);
        assert!(m1 <= m0 + 3.0 * (s0 * s0 + s1 * s1).sqrt(), "{stats:?}");
    }
    let start = LyapunovConstants::w(la, lb, lg, &[2.0], &[-1.0]);
    assert!(stats[0].0 < start, "{} vs {start}", stats[0].0);
}
