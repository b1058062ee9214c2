//! Executable checks of the auxiliary bounds: displacement moments of the
//! segment operators, the Lyapunov sandwich of Hamiltonian systems, the
//! integrability condition of gradient models and exponential moments along
//! reference paths.

use std::fmt;

use gauss_quad::GaussLegendre;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::girsanov::{novikov_margin, NovikovEstimate, NovikovQuantity};
use crate::models::{LyapunovConstants, Memory, SdeModel};
use crate::montecarlo::{map_paths, mean_stderr, Execution};
use crate::rng::{path_rng, BrownianPath};
use crate::schemes::{grid_steps, simulate, SchemeKind};
use crate::segment::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub check_id: String,
    pub inputs: Value,
    pub rows: Vec<Value>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl DiagnosticReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("row serializes")
}

/// Segment operator compared with the exact segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentOperator {
    /// `‖Y_t - Ŷ_{t_δ}‖_∞`, bound exponent `(p - 2) / 2`.
    Interpolated,
    /// `‖Y_t - Y_{(t + ·) ∧ t_δ}‖_∞`, bound exponent `p / 2`.
    Truncated,
}

impl SegmentOperator {
    pub fn exponent(self, p: f64) -> f64 {
        match self {
            SegmentOperator::Interpolated => (p - 2.0) / 2.0,
            SegmentOperator::Truncated => p / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementConfig {
    /// Largest admitted growth of `estimate / delta^exponent` from a coarse
    /// level to any finer one.
    pub growth_bound: f64,
    /// Reference grid `fine_factor * max(levels)` steps per `tau`.
    pub fine_factor: usize,
    pub execution: Execution,
}

impl Default for DisplacementConfig {
    fn default() -> Self {
        Self {
            growth_bound: 4.0,
            fine_factor: 16,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementRow {
    pub operator: SegmentOperator,
    pub m: usize,
    pub delta: f64,
    pub exponent: f64,
    pub mean: f64,
    pub stderr: f64,
    pub ratio: f64,
}

/// `max |Y(k - i) - Ŷ(i)|` over the window, for both operators, at fine node
/// `k` with coarse anchor `anchor` and coarse spacing `f` fine steps.
fn displacements(traj: &Trajectory, k: i64, f: i64, window: i64) -> (f64, f64) {
    let anchor = k.div_euclid(f) * f;
    let d = traj.dim();
    let mut buf = vec![0.0; d];
    let (mut interp, mut trunc) = (0.0f64, 0.0f64);
    for i in 0..=window {
        let y = traj.node(k - i);
        let s = anchor - i;
        let j0 = s.div_euclid(f) * f;
        if s == j0 {
            buf.copy_from_slice(traj.node(s));
        } else {
            let w = (s - j0) as f64 / f as f64;
            let (lo, hi) = (traj.node(j0), traj.node(j0 + f));
            for c in 0..d {
                buf[c] = (1.0 - w) * lo[c] + w * hi[c];
            }
        }
        let di: f64 = y.iter().zip(&buf).map(|(a, b)| (a - b) * (a - b)).sum();
        interp = interp.max(di.sqrt());
        let frozen = traj.node((k - i).min(anchor));
        let dt: f64 = y.iter().zip(frozen).map(|(a, b)| (a - b) * (a - b)).sum();
        trunc = trunc.max(dt.sqrt());
    }
    (interp, trunc)
}

/// Largest ratio of a finer-level value to a coarser-level one.
fn growth(ratios: &[f64]) -> f64 {
    let mut g = 0.0f64;
    for i in 0..ratios.len() {
        for j in i + 1..ratios.len() {
            let r = if ratios[j] == 0.0 {
                0.0
            } else if ratios[i] == 0.0 {
                f64::INFINITY
            } else {
                ratios[j] / ratios[i]
            };
            g = g.max(r);
        }
    }
    g
}

/// `E ‖Y_t - Ŷ‖_∞^p` at `t = T - delta_fine` for each level and both segment
/// operators, on reference paths. Passes when `estimate / delta^exponent`
/// grows by less than `growth_bound` from any level to a finer one.
pub fn displacement_scaling(
    model: &SdeModel,
    p: f64,
    levels: &[usize],
    t: f64,
    n_paths: usize,
    seed: u64,
    config: &DisplacementConfig,
) -> Result<DiagnosticReport> {
    if !(p >= 2.0) {
        return Err(Error::Config(format!(
            "moment order p must be >= 2, got {p}"
        )));
    }
    if matches!(model.memory(), Memory::Infinite { .. }) {
        return Err(Error::Mismatch(format!(
            "displacement check needs a finite memory window, model `{}` has infinite memory",
            model.name()
        )));
    }
    if levels.len() < 2 || levels.windows(2).any(|w| w[0] >= w[1]) || levels[0] == 0 {
        return Err(Error::Config(format!(
            "need at least two strictly increasing positive levels, got {levels:?}"
        )));
    }
    if n_paths < 2 || config.fine_factor < 2 {
        return Err(Error::Config(
            "need at least two paths and a fine factor >= 2".into(),
        ));
    }
    let m_fine = config.fine_factor * levels[levels.len() - 1];
    if let Some(l) = levels.iter().find(|&&l| !m_fine.is_multiple_of(l)) {
        return Err(Error::Config(format!(
            "level {l} does not divide the fine grid {m_fine}"
        )));
    }
    let n_fine = grid_steps(model.tau(), m_fine, t)?;
    if n_fine < 1 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    let reference = model.reference();
    let scheme = SchemeKind::reference_for(model);
    let k = n_fine as i64 - 1;
    let samples = map_paths(n_paths, config.execution, |i| {
        let bm = BrownianPath::generate(seed, i, model.dim(), model.tau(), m_fine, n_fine);
        let traj = simulate(&reference, scheme, m_fine, t, &bm)?;
        Ok(levels
            .iter()
            .map(|&l| {
                let (a, b) = displacements(&traj, k, (m_fine / l) as i64, m_fine as i64);
                (a.powf(p), b.powf(p))
            })
            .collect::<Vec<_>>())
    })?;

    let mut rows = Vec::new();
    let mut verdict = Verdict::Pass;
    let mut notes = Vec::new();
    let all_zero = samples.iter().flatten().all(|&(a, b)| a == 0.0 && b == 0.0);
    let mut growths = Vec::new();
    for op in [SegmentOperator::Interpolated, SegmentOperator::Truncated] {
        let mut ratios = Vec::new();
        for (j, &l) in levels.iter().enumerate() {
            let xs: Vec<f64> = samples
                .iter()
                .map(|s| match op {
                    SegmentOperator::Interpolated => s[j].0,
                    SegmentOperator::Truncated => s[j].1,
                })
                .collect();
            let (mean, stderr, _) = mean_stderr(&xs);
            let delta = model.tau() / l as f64;
            let exponent = op.exponent(p);
            let ratio = mean / delta.powf(exponent);
            if mean > 0.0 && stderr > 0.5 * mean {
                verdict = Verdict::Inconclusive;
                notes.push(format!(
                    "{op:?} at M = {l}: stderr {stderr:.3e} above half the mean {mean:.3e}"
                ));
            }
            ratios.push(ratio);
            rows.push(to_value(&DisplacementRow {
                operator: op,
                m: l,
                delta,
                exponent,
                mean,
                stderr,
                ratio,
            }));
        }
        let g = growth(&ratios);
        growths.push(json!({ "operator": op, "growth": g }));
        if !all_zero && verdict != Verdict::Inconclusive && !(g < config.growth_bound) {
            verdict = Verdict::Fail;
            notes.push(format!(
                "{op:?}: ratio grows by {g:.3} towards finer levels, bound {}",
                config.growth_bound
            ));
        }
    }
    if all_zero {
        verdict = Verdict::Pass;
        notes.push("displacement is identically zero".into());
    }
    Ok(DiagnosticReport {
        check_id: "displacement-scaling".into(),
        inputs: json!({
            "model": model.name(),
            "p": p,
            "levels": levels,
            "t": t,
            "evaluated_at": t - model.tau() / m_fine as f64,
            "m_fine": m_fine,
            "n_paths": n_paths,
            "seed": seed,
            "growth_bound": config.growth_bound,
            "growth": growths,
        }),
        rows,
        verdict,
        notes,
    })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[derive(Debug, Clone, Copy, Default)]
struct SandwichTally {
    samples: usize,
    lower_violations: usize,
    upper_violations: usize,
    alt_violations: usize,
    min_lower_slack: f64,
    min_upper_slack: f64,
}

fn sandwich(
    a: f64,
    b: f64,
    g: f64,
    n_samples: usize,
    seed: u64,
    dim: usize,
) -> Result<(LyapunovConstants, SandwichTally)> {
    let k = LyapunovConstants::new(a, b, g)?;
    let mut tally = SandwichTally {
        min_lower_slack: f64::INFINITY,
        min_upper_slack: f64::INFINITY,
        ..Default::default()
    };
    let mut check = |x: &[f64], y: &[f64]| {
        let w = LyapunovConstants::w(a, b, g, x, y);
        let r = norm2(x) + norm2(y);
        let tol = 1e-12 * (k.kappa1 + k.kappa2.abs() + a + b + g.abs()) * r;
        let lower = w - k.kappa2 * r;
        let upper = k.kappa1 * r - w;
        tally.samples += 1;
        if lower < -tol {
            tally.lower_violations += 1;
        }
        if upper < -tol {
            tally.upper_violations += 1;
        }
        if w - k.kappa2_alt * r < -tol {
            tally.alt_violations += 1;
        }
        if r > 0.0 {
            tally.min_lower_slack = tally.min_lower_slack.min(lower / r);
            tally.min_upper_slack = tally.min_upper_slack.min(upper / r);
        }
    };
    let zero = vec![0.0; dim];
    check(&zero, &zero);
    // extreme directions of the quadratic form [[a, g], [g, b]] / 2
    let mean = 0.5 * (a + b);
    let gap = (0.25 * (a - b) * (a - b) + g * g).sqrt();
    for lam in [mean - gap, mean + gap] {
        let (u, v) = if g != 0.0 {
            (g, lam - a)
        } else if (lam - a).abs() <= (lam - b).abs() {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let mut x = zero.clone();
        let mut y = zero.clone();
        x[0] = u;
        y[0] = v;
        check(&x, &y);
    }
    let mut rng = path_rng(seed, 0);
    for _ in 0..n_samples {
        let scale = (rng.random::<f64>() * 6.0 - 3.0).exp();
        let x: Vec<f64> = (0..dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let y: Vec<f64> = (0..dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        check(&x, &y);
    }
    Ok((k, tally))
}

/// Evaluates `W(x, y) = a/2 |x|^2 + b/2 |y|^2 + g <x, y>` against
/// `kappa2 (|x|^2 + |y|^2)` and `kappa1 (|x|^2 + |y|^2)` at random points,
/// at the origin and along both principal directions.
pub fn lyapunov_bounds_check(
    alpha: f64,
    beta: f64,
    gamma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<DiagnosticReport> {
    let (k, t) = sandwich(alpha, beta, gamma, n_samples, seed, 2)?;
    let ok = t.lower_violations == 0 && t.upper_violations == 0;
    let mut notes = Vec::new();
    if t.alt_violations > 0 || k.kappa2_alt <= 0.0 {
        notes.push(format!(
            "the lower constant with b - 2|g|/S is {:.6}; it fails the lower bound at {} points",
            k.kappa2_alt, t.alt_violations
        ));
    }
    if k.kappa2 <= 0.0 {
        notes.push(format!("kappa2 = {:.6} is not positive here", k.kappa2));
    }
    Ok(DiagnosticReport {
        check_id: "lyapunov-bounds".into(),
        inputs: json!({ "alpha": alpha, "beta": beta, "gamma": gamma, "n_samples": n_samples, "seed": seed }),
        rows: vec![json!({
            "kappa1": k.kappa1,
            "kappa2": k.kappa2,
            "kappa2_alt": k.kappa2_alt,
            "kappa3": k.kappa3,
            "samples": t.samples,
            "lower_violations": t.lower_violations,
            "upper_violations": t.upper_violations,
            "alt_violations": t.alt_violations,
            "min_lower_slack": t.min_lower_slack,
            "min_upper_slack": t.min_upper_slack,
        })],
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        notes,
    })
}

/// Runs the sandwich check on an `n^3` grid of `alpha, beta` in
/// `(0, max_weight]` and `gamma` strictly inside `(-alpha beta, alpha beta)`.
pub fn lyapunov_grid_check(
    n: usize,
    max_weight: f64,
    samples_per_point: usize,
    seed: u64,
) -> Result<DiagnosticReport> {
    if n == 0 || !(max_weight > 0.0) {
        return Err(Error::Config(
            "grid needs n >= 1 and a positive maximum weight".into(),
        ));
    }
    let mut failures = Vec::new();
    let (mut points, mut alt_bad, mut non_positive) = (0usize, 0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let a = max_weight * (i + 1) as f64 / n as f64;
                let b = max_weight * (j + 1) as f64 / n as f64;
                let g = a * b * (-1.0 + (2 * l + 1) as f64 / n as f64);
                let point_seed = seed.wrapping_add((i * n * n + j * n + l) as u64);
                let (k, t) = sandwich(a, b, g, samples_per_point, point_seed, 2)?;
                points += 1;
                if t.lower_violations > 0 || t.upper_violations > 0 {
                    failures.push(json!({ "alpha": a, "beta": b, "gamma": g }));
                }
                if t.alt_violations > 0 {
                    alt_bad += 1;
                }
                if k.kappa2 <= 0.0 {
                    non_positive += 1;
                }
            }
        }
    }
    let mut notes = vec![format!(
        "the lower constant with b - 2|g|/S fails the lower bound at {alt_bad} of {points} grid points"
    )];
    if non_positive > 0 {
        notes.push(format!(
            "kappa2 <= 0 at {non_positive} of {points} grid points (the sandwich then holds trivially from below)"
        ));
    }
    Ok(DiagnosticReport {
        check_id: "lyapunov-grid".into(),
        inputs: json!({ "n": n, "max_weight": max_weight, "samples_per_point": samples_per_point, "seed": seed }),
        rows: vec![
            json!({ "points": points, "failures": failures.len(), "alt_failures": alt_bad, "non_positive_kappa2": non_positive }),
        ],
        verdict: if failures.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Width of one Gauss-Legendre panel.
    pub panel_width: f64,
    pub nodes: usize,
    /// Target for the Gaussian-envelope tail bound, relative to the integral.
    pub tail_tol: f64,
    pub initial_radius: f64,
    pub max_radius: f64,
    /// Largest relative change under panel halving.
    pub refine_tol: f64,
    /// Log-integrand above which the integrand is taken to have left every
    /// Gaussian envelope.
    pub log_envelope: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            panel_width: 0.25,
            nodes: 10,
            tail_tol: 1e-10,
            initial_radius: 2.0,
            max_radius: 256.0,
            refine_tol: 1e-9,
            log_envelope: 700.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mu0Result {
    pub kappa: f64,
    /// `mu_0(exp(kappa |Z|^2))`, absent when diverged or inconclusive.
    pub value: Option<f64>,
    pub diverged: bool,
    pub radius: f64,
    pub tail_bound: f64,
    pub refinement_change: f64,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl Mu0Result {
    pub fn to_report(&self, model: &SdeModel) -> DiagnosticReport {
        DiagnosticReport {
            check_id: "mu0-integrability".into(),
            inputs: json!({ "model": model.name(), "kappa": self.kappa }),
            rows: vec![to_value(self)],
            verdict: self.verdict,
            notes: self.notes.clone(),
        }
    }
}

struct Integrand<'a> {
    model: &'a SdeModel,
    kappa: f64,
    z: Vec<f64>,
}

impl Integrand<'_> {
    fn log_value(&mut self, x: &[f64], with_z: bool) -> f64 {
        let v = self.model.potential(x).expect("gradient model");
        if !with_z {
            return -v;
        }
        self.model.pointwise_z(x, &mut self.z);
        self.kappa * norm2(&self.z) - v
    }
}

/// Composite Gauss-Legendre nodes and weights on `[-r, r]`.
fn composite_rule(r: f64, width: f64, nodes: usize) -> Result<Vec<(f64, f64)>> {
    let rule = GaussLegendre::new(
        nodes
            .try_into()
            .map_err(|_| Error::Config("need at least two quadrature nodes".into()))?,
    );
    let panels = (2.0 * r / width).ceil().max(1.0) as usize;
    let h = 2.0 * r / panels as f64;
    let mut out = Vec::with_capacity(panels * nodes);
    for p in 0..panels {
        let mid = -r + (p as f64 + 0.5) * h;
        for (x, w) in rule.iter() {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    Ok(out)
}

/// `(int e^{kappa |Z|^2 - V}, int e^{-V})` over `[-r, r]^d`.
fn box_integrals(
    f: &mut Integrand<'_>,
    d: usize,
    r: f64,
    width: f64,
    nodes: usize,
) -> Result<(f64, f64)> {
    let rule = composite_rule(r, width, nodes)?;
    let (mut with_z, mut without) = (0.0, 0.0);
    let mut x = vec![0.0; d];
    match d {
        1 => {
            for &(xi, wi) in &rule {
                x[0] = xi;
                with_z += wi * f.log_value(&x, true).exp();
                without += wi * f.log_value(&x, false).exp();
            }
        }
        _ => {
            for &(xi, wi) in &rule {
                for &(yj, wj) in &rule {
                    x[0] = xi;
                    x[1] = yj;
                    let w = wi * wj;
                    with_z += w * f.log_value(&x, true).exp();
                    without += w * f.log_value(&x, false).exp();
                }
            }
        }
    }
    Ok((with_z, without))
}

/// Largest log-integrand on the boundary of `[-r, r]^d`.
fn boundary_max(f: &mut Integrand<'_>, d: usize, r: f64, with_z: bool) -> f64 {
    let mut best = f64::NEG_INFINITY;
    if d == 1 {
        for s in [-r, r] {
            best = best.max(f.log_value(&[s], with_z));
        }
        return best;
    }
    let k = 256;
    for i in 0..=k {
        let u = -r + 2.0 * r * i as f64 / k as f64;
        for p in [[u, r], [u, -r], [r, u], [-r, u]] {
            best = best.max(f.log_value(&p, with_z));
        }
    }
    best
}

/// Tail of the integrand outside `[-r, r]^d` under the Gaussian envelope
/// fitted between radii `r / 2` and `r`; infinite when not decaying.
fn tail_bound(f: &mut Integrand<'_>, d: usize, r: f64, with_z: bool) -> (f64, f64) {
    let outer = boundary_max(f, d, r, with_z);
    let inner = boundary_max(f, d, 0.5 * r, with_z);
    let rate = (inner - outer) / (0.75 * r * r);
    if !(rate > 0.0) {
        return (f64::INFINITY, outer);
    }
    let faces = 2.0 * d as f64 * (2.0 * r).powi(d as i32 - 1);
    (faces * outer.exp() / (2.0 * rate * r), outer)
}

/// `mu_0(exp(kappa |Z|^2))` with `mu_0 = C_V e^{-V} dx`, by composite
/// Gauss-Legendre on a box whose half-width doubles until the Gaussian
/// envelope tail bound is below tolerance, checked under panel halving.
pub fn mu0_integrability(
    model: &SdeModel,
    kappa: f64,
    config: &QuadratureConfig,
) -> Result<Mu0Result> {
    if model.potential(&vec![0.0; model.dim()]).is_none() {
        return Err(Error::Mismatch(format!(
            "model `{}` has no gradient drift",
            model.name()
        )));
    }
    let d = model.dim();
    if d > 2 {
        return Err(Error::Domain(format!(
            "quadrature supports d <= 2, got d = {d}"
        )));
    }
    if !(kappa >= 0.0) {
        return Err(Error::Config(format!("kappa must be >= 0, got {kappa}")));
    }
    let mut f = Integrand {
        model,
        kappa,
        z: vec![0.0; d],
    };
    let mut notes = Vec::new();
    let mut r = config.initial_radius;
    let diverged = |r: f64, notes: Vec<String>| Mu0Result {
        kappa,
        value: None,
        diverged: true,
        radius: r,
        tail_bound: f64::INFINITY,
        refinement_change: f64::NAN,
        verdict: Verdict::Fail,
        notes,
    };
    let tail = loop {
        let (tz, outer) = tail_bound(&mut f, d, r, true);
        let (t0, _) = tail_bound(&mut f, d, r, false);
        if outer > config.log_envelope {
            notes.push(format!(
                "log-integrand reaches {outer:.1} at radius {r}, beyond the envelope {}",
                config.log_envelope
            ));
            return Ok(diverged(r, notes));
        }
        if tz.is_finite() && t0.is_finite() {
            let (iz, i0) = box_integrals(&mut f, d, r, config.panel_width, config.nodes)?;
            let rel = (tz / iz).max(t0 / i0);
            if rel <= config.tail_tol {
                break rel;
            }
        }
        if r >= config.max_radius {
            if !tz.is_finite() {
                notes.push(format!("integrand does not decay up to radius {r}"));
                return Ok(diverged(r, notes));
            }
            notes.push(format!("tail bound not reached at the maximum radius {r}"));
            return Ok(Mu0Result {
                kappa,
                value: None,
                diverged: false,
                radius: r,
                tail_bound: tz,
                refinement_change: f64::NAN,
                verdict: Verdict::Inconclusive,
                notes,
            });
        }
        r *= 2.0;
    };
    let (cz, c0) = box_integrals(&mut f, d, r, config.panel_width, config.nodes)?;
    let (fz, f0) = box_integrals(&mut f, d, r, 0.5 * config.panel_width, config.nodes)?;
    let coarse = cz / c0;
    let fine = fz / f0;
    let change = ((fine - coarse) / fine).abs();
    let converged = change <= config.refine_tol;
    if !converged {
        notes.push(format!("relative change {change:.3e} under panel halving"));
    }
    Ok(Mu0Result {
        kappa,
        value: if converged { Some(fine) } else { None },
        diverged: false,
        radius: r,
        tail_bound: tail,
        refinement_change: change,
        verdict: if converged {
            Verdict::Pass
        } else {
            Verdict::Inconclusive
        },
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub estimate: NovikovEstimate,
    pub below_threshold: bool,
    /// Full-sample and half-sample means agree within three half-sample
    /// standard errors.
    pub stable: bool,
}

/// Exponential moments over a grid of `lambda`, set against the threshold
/// of the matching lemma. Rows below the threshold must be finite and stable
/// under doubling of the path count; rows above are reported only.
#[allow(clippy::too_many_arguments)]
pub fn exponential_moment_sweep(
    model: &SdeModel,
    quantity: NovikovQuantity,
    t: f64,
    m: usize,
    lambdas: &[f64],
    n_paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<DiagnosticReport> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    let mut verdict = Verdict::Pass;
    let mut notes = Vec::new();
    let mut threshold = None;
    for &lambda in lambdas {
        let e = novikov_margin(model, quantity, t, m, lambda, n_paths, seed, execution)?;
        let stable =
            !e.unbounded() && (e.mean - e.half_mean).abs() <= 3.0 * e.half_stderr + 1e-12 * e.mean;
        let below = e.below_threshold();
        threshold = e.threshold.clone();
        if below {
            if e.unbounded() {
                verdict = Verdict::Fail;
                notes.push(format!(
                    "lambda = {lambda}: empirically unbounded below the threshold"
                ));
            } else if !stable && verdict == Verdict::Pass {
                verdict = Verdict::Inconclusive;
                notes.push(format!(
                    "lambda = {lambda}: estimate not stable under doubling"
                ));
            }
        } else if e.unbounded() {
            notes.push(format!(
                "lambda = {lambda} (above threshold): empirically unbounded"
            ));
        } else if !stable {
            notes.push(format!(
                "lambda = {lambda} (above threshold): not stable under doubling"
            ));
        }
        rows.push(to_value(&SweepRow {
            estimate: e,
            below_threshold: below,
            stable,
        }));
    }
    Ok(DiagnosticReport {
        check_id: "exponential-moment-sweep".into(),
        inputs: json!({
            "model": model.name(),
            "quantity": quantity.to_string(),
            "t": t,
            "m": m,
            "lambdas": lambdas,
            "n_paths": n_paths,
            "seed": seed,
            "threshold": threshold,
        }),
        rows,
        verdict,
        notes,
    })
}
