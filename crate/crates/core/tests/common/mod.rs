#![allow(dead_code)]

use pathsde::models::{builtin_model, evaluate_functional_drift, overrides, Memory, SdeModel};
use pathsde::segment::{
    euclid, interpolate_segment, interpolated_norm_bound_check, segment_norm, HistoryNorm,
    SegmentKind, SegmentPath, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const PAIRS: usize = 10_000;
const M: usize = 8;
const SLACK: f64 = 1e-9;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Standard normal vector scaled by a log-uniform factor in `[lo, hi]`.
fn gaussian(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let scale = log_uniform(rng, lo, hi);
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn window(model: &SdeModel, values: Vec<f64>) -> SegmentPath {
    let steps = model.history_steps(M);
    SegmentPath::new(
        model.tau(),
        M,
        steps,
        model.state_dim(),
        values,
        model.segment_kind(),
    )
    .unwrap()
}

pub fn catalog_models() -> Vec<SdeModel> {
    let cases: &[(&str, &[(&str, &str)])] = &[
        ("zero-drift", &[]),
        ("ou-linear", &[("d", "2")]),
        ("holder-point-delay", &[]),
        ("holder-point-delay", &[("alpha", "0.3"), ("d", "3")]),
        ("holder-supnorm", &[]),
        ("holder-supnorm", &[("alpha", "0.5"), ("d", "2")]),
        ("infinite-exp", &[]),
        ("infinite-exp", &[("alpha", "0.4"), ("d", "2")]),
        ("hamiltonian-holder", &[]),
        ("hamiltonian-holder", &[("alpha", "0.5"), ("d", "2")]),
        ("gradient-gaussian", &[]),
        (
            "gradient-gaussian",
            &[("alpha", "0.5"), ("d", "2"), ("rho", "point")],
        ),
    ];
    cases
        .iter()
        .map(|(name, kv)| builtin_model(name, &overrides(kv)).unwrap())
        .collect()
}

/// `|b(x) - b(y)| <= L |x - y|` and the dissipativity bound on random points.
pub fn check_local_drift(model: &SdeModel, rng: &mut ChaCha8Rng) {
    let n = model.state_dim();
    let c = model.constants();
    let mut bx = vec![0.0; model.dim()];
    let mut by = vec![0.0; model.dim()];
    for _ in 0..PAIRS {
        let x = gaussian(rng, n, 1e-4, 1e3);
        let scale = euclid(&x).powi(2);
        let y: Vec<f64> = x
            .iter()
            .zip(gaussian(rng, n, 1e-6, 1e2))
            .map(|(a, e)| a + e)
            .collect();
        model.local_drift(&x, &mut bx);
        model.local_drift(&y, &mut by);
        let diff: Vec<f64> = bx.iter().zip(&by).map(|(a, b)| a - b).collect();
        if model.is_hamiltonian() {
            let d = model.dim();
            let dx: Vec<f64> = x[..d].iter().zip(&y[..d]).map(|(a, b)| a - b).collect();
            let dy: Vec<f64> = x[d..].iter().zip(&y[d..]).map(|(a, b)| a - b).collect();
            let k1 = c.k1.unwrap();
            let rhs = k1 * (euclid(&dx) + euclid(&dy));
            let rounding = 64.0 * f64::EPSILON * (euclid(&bx) + euclid(&by));
            assert!(
                euclid(&diff) <= rhs * (1.0 + SLACK) + rounding,
                "{}: K1 violated",
                model.name()
            );

            let (la, lb, lg) = (
                c.lyap_alpha.unwrap(),
                c.lyap_beta.unwrap(),
                c.lyap_gamma.unwrap(),
            );
            let lambda = c.lyap_lambda.unwrap();
            let (u, v) = x.split_at(d);
            let mut lhs = 0.0;
            for i in 0..d {
                lhs += (la * u[i] + lg * v[i]) * (u[i] + v[i]) + (lb * v[i] + lg * u[i]) * bx[i];
            }
            let rhs = c.c.unwrap() - lambda * (euclid(u).powi(2) + euclid(v).powi(2));
            assert!(
                lhs <= rhs + SLACK * scale,
                "{}: Lyapunov dissipativity violated",
                model.name()
            );
        } else {
            let l1 = c.l1.unwrap();
            let dxy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let rounding = 64.0 * f64::EPSILON * (euclid(&bx) + euclid(&by));
            assert!(
                euclid(&diff) <= l1 * euclid(&dxy) * (1.0 + SLACK) + rounding,
                "{}: L1 violated",
                model.name()
            );
            let inner: f64 = x.iter().zip(&bx).map(|(a, b)| a * b).sum();
            let rhs = c.c.unwrap() + c.beta.unwrap() * euclid(&x).powi(2);
            assert!(
                2.0 * inner <= rhs + SLACK * scale,
                "{}: dissipativity violated",
                model.name()
            );
        }
    }
}

/// Hölder bound of `Z` in the model's history norm on random window pairs,
/// including nearly equal pairs near the origin.
pub fn check_functional(model: &SdeModel, rng: &mut ChaCha8Rng) {
    let c = model.constants();
    let alpha = c.alpha.unwrap();
    let n = (model.history_steps(M) + 1) * model.state_dim();
    let delta = model.tau() / M as f64;
    let d = model.dim();
    for _ in 0..PAIRS {
        let xi = gaussian(rng, n, 1e-6, 1e2);
        let eta: Vec<f64> = xi
            .iter()
            .zip(gaussian(rng, n, 1e-9, 1e2))
            .map(|(a, e)| a + e)
            .collect();
        let zx = evaluate_functional_drift(model, &window(model, xi.clone())).unwrap();
        let zy = evaluate_functional_drift(model, &window(model, eta.clone())).unwrap();
        let dz = euclid(&zx.iter().zip(&zy).map(|(a, b)| a - b).collect::<Vec<_>>());
        let diff: Vec<f64> = xi.iter().zip(&eta).map(|(a, b)| a - b).collect();
        let rhs = match model.memory() {
            Memory::Hamiltonian => {
                let rows = model.history_steps(M) + 1;
                let (mut px, mut py) = (Vec::new(), Vec::new());
                for r in 0..rows {
                    px.extend_from_slice(&diff[r * 2 * d..r * 2 * d + d]);
                    py.extend_from_slice(&diff[r * 2 * d + d..(r + 1) * 2 * d]);
                }
                let nx = px.chunks(d).map(euclid).fold(0.0, f64::max);
                let ny = py.chunks(d).map(euclid).fold(0.0, f64::max);
                c.k2.unwrap() * (nx.powf(alpha) + ny.powf(alpha))
            }
            Memory::Infinite { rate, .. } => {
                let norm = HistoryNorm::ExpWeighted { rate };
                let steps = model.history_steps(M);
                let p =
                    SegmentPath::new(model.tau(), M, steps, d, diff, model.segment_kind()).unwrap();
                c.l4.unwrap() * segment_norm(&p, norm).unwrap().powf(alpha)
            }
            _ => {
                let sup = diff.chunks(d).map(euclid).fold(0.0, f64::max);
                c.l2.unwrap() * sup.powf(alpha)
            }
        };
        let rounding = 64.0 * f64::EPSILON * (euclid(&zx) + euclid(&zy));
        assert!(
            dz <= rhs * (1.0 + SLACK) + rounding,
            "{}: Hölder bound violated, |dZ| = {dz:e} > {rhs:e} (delta = {delta})",
            model.name()
        );
    }
}

pub fn verify_catalog_constants(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for model in catalog_models() {
        check_local_drift(&model, &mut rng);
        check_functional(&model, &mut rng);
    }
}

fn random_segment(rng: &mut ChaCha8Rng) -> SegmentPath {
    let m = rng.random_range(1..24);
    let dim = rng.random_range(1..4);
    let values = (0..(m + 1) * dim)
        .map(|_| rng.random_range(-50.0..50.0))
        .collect();
    SegmentPath::new(1.0, m, m, dim, values, SegmentKind::LinearInterp).unwrap()
}

/// Trajectory with two windows of history, and its coarsening factor.
fn random_trajectory(rng: &mut ChaCha8Rng) -> (Trajectory, usize) {
    let factor = [1usize, 2, 4][rng.random_range(0..3)];
    let m = factor * rng.random_range(1..5);
    let dim = rng.random_range(1..3);
    let n = rng.random_range(1..40);
    let history = 2 * m;
    let mut traj = Trajectory::zeros(1.0, m, dim, history, n);
    for k in -(history as i64)..=n as i64 {
        for v in traj.node_mut(k) {
            *v = rng.random_range(-10.0..10.0);
        }
    }
    (traj, factor)
}

/// Node reproduction, the two-window interpolation bound, truncation
/// contraction and the `e^{r delta}` weighted-norm bound on `cases` random
/// inputs each.
pub fn verify_segment_invariants(seed: u64, cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let p = random_segment(&mut rng);
        let delta = p.delta();
        for lag in 0..=p.m() {
            let v = interpolate_segment(&p, -(lag as f64) * delta).unwrap();
            assert_eq!(v.as_slice(), p.at_lag(lag), "node reproduction");
        }

        let (traj, factor) = random_trajectory(&mut rng);
        let m = traj.m();
        let rate = rng.random_range(0.0..4.0);
        let weighted = SegmentKind::InfiniteWeighted { rate };
        let coarse_delta = factor as f64 * traj.delta();
        for k in 0..=traj.n_steps() as i64 {
            assert!(
                interpolated_norm_bound_check(&traj, k, factor).unwrap(),
                "interpolation bound at k = {k}"
            );
            let exact = traj.segment(k, m, SegmentKind::LinearInterp).unwrap();
            let trunc = traj
                .truncated_segment(k, factor, m, SegmentKind::LeftTruncated)
                .unwrap();
            assert!(
                segment_norm(&trunc, HistoryNorm::Sup).unwrap()
                    <= segment_norm(&exact, HistoryNorm::Sup).unwrap(),
                "truncation contraction at k = {k}"
            );
            let norm = HistoryNorm::ExpWeighted { rate };
            let lhs = segment_norm(
                &traj.truncated_segment(k, factor, m, weighted).unwrap(),
                norm,
            )
            .unwrap();
            let rhs = (rate * coarse_delta).exp()
                * segment_norm(&traj.segment(k, m, weighted).unwrap(), norm).unwrap();
            assert!(
                lhs <= rhs * (1.0 + 1e-12),
                "weighted-norm bound at k = {k}: {lhs} > {rhs}"
            );
        }
    }
}
