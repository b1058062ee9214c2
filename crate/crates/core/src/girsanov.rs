//! Discrete change-of-measure weights along reference paths, the
//! importance-sampled estimators built on them and Monte Carlo estimates of
//! exponential moments.
//!
//! Reference paths solve the model with the path functional removed. The
//! weight `R1` turns their law into the scheme law of the full model at the
//! same stepsize; `R2` with a drift perturbation `h` maps a fine reference
//! path to the coarse scheme.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{
    evaluate_functional_drift, lambda_thresholds, LambdaThreshold, Memory, SdeModel,
};
use crate::montecarlo::{
    flag_non_finite, map_paths, mean_stderr, Execution, MonteCarloEstimate, Payoff,
};
use crate::rng::BrownianPath;
use crate::schemes::{coupling_factor, grid_steps, simulate, SchemeKind, SlidingMax, ZEvaluator};
use crate::segment::{euclid, SegmentKind, Trajectory};

/// Log-weights above this value are capped by default.
pub const DEFAULT_LOG_WEIGHT_CAP: f64 = 30.0;

/// Drift perturbation between the reference path and a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    /// Interpolated segment frozen at the coarse grid time (finite memory).
    H1,
    /// Left-truncated segment (finite memory, Hamiltonian systems).
    H2,
    /// Left-truncated segment with exponentially weighted history.
    H3,
    /// Distributed delay over a left-truncated segment.
    H4,
}

impl Perturbation {
    pub fn id(self) -> &'static str {
        match self {
            Perturbation::H1 => "h1",
            Perturbation::H2 => "h2",
            Perturbation::H3 => "h3",
            Perturbation::H4 => "h4",
        }
    }

    /// Checks that the perturbation belongs to the model's memory kind.
    pub fn check(self, model: &SdeModel) -> Result<()> {
        let ok = match self {
            Perturbation::H1 => matches!(model.memory(), Memory::Finite),
            Perturbation::H2 => matches!(model.memory(), Memory::Finite | Memory::Hamiltonian),
            Perturbation::H3 => matches!(model.memory(), Memory::Infinite { .. }),
            Perturbation::H4 => matches!(model.memory(), Memory::Distributed { .. }),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Mismatch(format!(
                "perturbation {} does not apply to memory {:?} of model `{}`",
                self.id(),
                model.memory(),
                model.name()
            )))
        }
    }

    /// Scheme whose coarse law the `R2` weight reproduces.
    pub fn scheme(self, model: &SdeModel) -> SchemeKind {
        match self {
            Perturbation::H1 => SchemeKind::Interp,
            _ => SchemeKind::reference_for(model),
        }
    }
}

impl FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "h1" => Ok(Perturbation::H1),
            "h2" => Ok(Perturbation::H2),
            "h3" => Ok(Perturbation::H3),
            "h4" => Ok(Perturbation::H4),
            other => Err(Error::Config(format!(
                "unknown perturbation `{other}` (expected h1..h4)"
            ))),
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Default number of fine reference steps per coarse step for `R2`.
pub const DEFAULT_FINE_FACTOR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Variant {
    /// `g = sigma^{-1} Z(Y_{t_k})` on the scheme grid.
    R1,
    /// `g = -h(t_j)` on a reference grid `factor` times finer than the scheme.
    R2 { h: Perturbation, factor: usize },
}

impl Variant {
    pub fn check(&self, model: &SdeModel) -> Result<()> {
        if !model.sigma().is_invertible() {
            return Err(Error::Config(format!(
                "the noise coefficient of `{}` is not invertible",
                model.name()
            )));
        }
        match *self {
            Variant::R1 => Ok(()),
            Variant::R2 { h, factor } => {
                if factor == 0 {
                    return Err(Error::Config("fine factor must be >= 1".into()));
                }
                h.check(model)
            }
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    /// `r1`, `r2:h1`, `r2:h2:4`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["r1"] => Ok(Variant::R1),
            ["r2", h] => Ok(Variant::R2 {
                h: h.parse()?,
                factor: DEFAULT_FINE_FACTOR,
            }),
            ["r2", h, f] => Ok(Variant::R2 {
                h: h.parse()?,
                factor: f
                    .parse()
                    .map_err(|_| Error::Config(format!("cannot parse fine factor `{f}`")))?,
            }),
            _ => Err(Error::Config(format!(
                "cannot parse weight variant `{s}` (expected r1, r2:h<k> or r2:h<k>:<factor>)"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::R1 => f.write_str("r1"),
            Variant::R2 { h, factor } => write!(f, "r2:{h}:{factor}"),
        }
    }
}

/// `log_weight = stochastic_integral - quadratic_variation_half`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GirsanovWeight {
    pub log_weight: f64,
    pub stochastic_integral: f64,
    pub quadratic_variation_half: f64,
}

impl GirsanovWeight {
    pub fn from_parts(stochastic_integral: f64, quadratic_variation_half: f64) -> Self {
        Self {
            log_weight: stochastic_integral - quadratic_variation_half,
            stochastic_integral,
            quadratic_variation_half,
        }
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    /// Weight with the log-weight capped at `cap`; the flag reports capping.
    pub fn capped_weight(&self, cap: f64) -> (f64, bool) {
        if self.log_weight > cap {
            (cap.exp(), true)
        } else {
            (self.log_weight.exp(), false)
        }
    }
}

/// `h` at fine node `j` of the reference trajectory `traj`, whose coarse
/// scheme grid is `factor` fine steps wide.
pub fn perturbation_h(
    model: &SdeModel,
    traj: &Trajectory,
    variant: Perturbation,
    j: i64,
    factor: usize,
) -> Result<Vec<f64>> {
    variant.check(model)?;
    if factor == 0 || !traj.m().is_multiple_of(factor) {
        return Err(Error::Config(format!(
            "fine factor {factor} does not divide the reference grid m = {}",
            traj.m()
        )));
    }
    if j < 0 || j > traj.n_steps() as i64 {
        return Err(Error::Domain(format!(
            "node {j} outside 0..={}",
            traj.n_steps()
        )));
    }
    let f = factor as i64;
    let anchor = j.div_euclid(f) * f;
    let seg = match variant {
        Perturbation::H1 => traj.interpolated_segment(anchor, factor)?,
        Perturbation::H2 | Perturbation::H4 => {
            traj.truncated_segment(j, factor, traj.m(), SegmentKind::LinearInterp)?
        }
        Perturbation::H3 => traj.truncated_segment(
            j,
            factor,
            model.history_steps(traj.m()),
            model.segment_kind(),
        )?,
    };
    let z = evaluate_functional_drift(model, &seg)?;
    let d = model.dim();
    let mut b_now = vec![0.0; d];
    let mut b_then = vec![0.0; d];
    model.local_drift(traj.node(j), &mut b_now);
    model.local_drift(traj.node(anchor), &mut b_then);
    let diff: Vec<f64> = (0..d).map(|i| (b_now[i] - b_then[i]) - z[i]).collect();
    model.sigma().apply_inverse(&diff)
}

fn accumulate(g: &[f64], dw: &[f64], delta: f64, si: &mut f64, qv: &mut f64) {
    for (gi, wi) in g.iter().zip(dw) {
        *si += gi * wi;
        *qv += gi * gi * delta;
    }
}

fn finite_weight(w: GirsanovWeight) -> Result<GirsanovWeight> {
    if w.log_weight.is_finite() {
        Ok(w)
    } else {
        Err(Error::NonFinite("weight".into()))
    }
}

/// Weight of one reference path, with the Itô sums taken on the grid of
/// `traj` and the increments of `brownian` summed to that grid.
pub fn weight_along_path(
    model: &SdeModel,
    traj: &Trajectory,
    brownian: &BrownianPath,
    variant: Variant,
) -> Result<GirsanovWeight> {
    variant.check(model)?;
    if traj.history_steps() != model.history_steps(traj.m()) || traj.dim() != model.state_dim() {
        return Err(Error::Mismatch(format!(
            "trajectory layout does not match model `{}`",
            model.name()
        )));
    }
    let factor = coupling_factor(model, traj.m(), brownian)?;
    let n = traj.n_steps();
    if brownian.n_steps() < n * factor {
        return Err(Error::Domain(format!(
            "trajectory horizon {} exceeds the Brownian coverage {}",
            traj.horizon(),
            brownian.horizon()
        )));
    }
    let delta = traj.delta();
    let mut dw = vec![0.0; model.dim()];
    let (mut si, mut qv) = (0.0, 0.0);
    match variant {
        Variant::R1 => {
            let mut z_eval = ZEvaluator::new(model, traj, 0);
            for k in 0..n {
                let z = z_eval.value(model, traj, k as i64);
                let g = model.sigma().apply_inverse(z)?;
                brownian.coarse_increment(factor, k, &mut dw);
                accumulate(&g, &dw, delta, &mut si, &mut qv);
                z_eval.push(model, traj, k as i64 + 1);
            }
        }
        Variant::R2 { h, factor: coarse } => {
            for j in 0..n {
                let g: Vec<f64> = perturbation_h(model, traj, h, j as i64, coarse)?
                    .into_iter()
                    .map(|v| -v)
                    .collect();
                brownian.coarse_increment(factor, j, &mut dw);
                accumulate(&g, &dw, delta, &mut si, &mut qv);
            }
        }
    }
    Ok(GirsanovWeight::from_parts(si, 0.5 * qv))
}

/// Settings shared by the weighted estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GirsanovConfig {
    pub execution: Execution,
    pub log_weight_cap: f64,
}

impl Default for GirsanovConfig {
    fn default() -> Self {
        Self {
            execution: Execution::default(),
            log_weight_cap: DEFAULT_LOG_WEIGHT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSampledEstimate {
    pub variant: Variant,
    /// Estimate of `E f` under the target law, from `R f(Y(T))`.
    pub estimate: MonteCarloEstimate,
    /// Scheme whose law at stepsize `tau / m` is the target.
    pub target_scheme: SchemeKind,
    pub weight_mean: f64,
    pub weight_stderr: f64,
    pub capped: usize,
    pub cap_rate: f64,
    pub log_weight_cap: f64,
    pub max_log_weight: f64,
}

struct WeightedSample {
    value: f64,
    weight: f64,
    log_weight: f64,
    capped: bool,
}

/// Simulates the reference path of path `i` on the grid `tau / m`.
fn reference_path(
    model: &SdeModel,
    m: usize,
    t: f64,
    n: usize,
    seed: u64,
    i: u64,
) -> Result<(Trajectory, BrownianPath)> {
    let bm = BrownianPath::generate(seed, i, model.dim(), model.tau(), m, n);
    let reference = model.reference();
    let traj = simulate(&reference, SchemeKind::reference_for(model), m, t, &bm)?;
    Ok((traj, bm))
}

/// `E[R f(Y(T))]` over reference paths: the scheme law of the model at
/// stepsize `tau / m`, interpolated or truncated as selected by `variant`.
#[allow(clippy::too_many_arguments)]
pub fn importance_sampled_expectation(
    model: &SdeModel,
    payoff: &Payoff,
    t: f64,
    m: usize,
    n_paths: usize,
    seed: u64,
    variant: Variant,
    config: &GirsanovConfig,
) -> Result<ImportanceSampledEstimate> {
    variant.check(model)?;
    payoff.check(model.state_dim())?;
    if n_paths < 2 {
        return Err(Error::Config("need at least two paths".into()));
    }
    let (m_ref, target_scheme) = match variant {
        Variant::R1 => (m, SchemeKind::reference_for(model)),
        Variant::R2 { h, factor } => (m * factor, h.scheme(model)),
    };
    grid_steps(model.tau(), m, t)?;
    let n = grid_steps(model.tau(), m_ref, t)?;
    let cap = config.log_weight_cap;
    let samples = map_paths(n_paths, config.execution, |i| {
        let run = || -> Result<WeightedSample> {
            let (traj, bm) = reference_path(model, m_ref, t, n, seed, i)?;
            let w = finite_weight(weight_along_path(model, &traj, &bm, variant)?)?;
            let (weight, capped) = w.capped_weight(cap);
            let value = weight * payoff.eval(traj.final_state());
            if !value.is_finite() {
                return Err(Error::NonFinite("weighted payoff".into()));
            }
            Ok(WeightedSample {
                value,
                weight,
                log_weight: w.log_weight,
                capped,
            })
        };
        flag_non_finite(run())
    })?;
    let values: Vec<Option<f64>> = samples
        .iter()
        .map(|s| s.as_ref().map(|s| s.value))
        .collect();
    let kept: Vec<&WeightedSample> = samples.iter().flatten().collect();
    let weights: Vec<f64> = kept.iter().map(|s| s.weight).collect();
    let (weight_mean, weight_stderr, _) = mean_stderr(&weights);
    let capped = kept.iter().filter(|s| s.capped).count();
    let max_log_weight = kept
        .iter()
        .map(|s| s.log_weight)
        .fold(f64::NEG_INFINITY, f64::max);
    let estimate = MonteCarloEstimate::from_samples(
        &values,
        payoff,
        model,
        &format!("weighted-{variant}"),
        t,
        m,
    );
    Ok(ImportanceSampledEstimate {
        variant,
        estimate,
        target_scheme,
        weight_mean,
        weight_stderr,
        capped,
        cap_rate: capped as f64 / n_paths as f64,
        log_weight_cap: cap,
        max_log_weight,
    })
}

/// Integrand `q` of an exponential moment `E exp(lambda int_0^T q dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NovikovQuantity {
    /// `‖Y_t‖^2` in the memory's history norm; `‖U_t‖^2 + ‖V_t‖^2` for
    /// Hamiltonian systems.
    SegmentNorm,
    /// `|sigma^{-1} Z(Y_t)|^2`.
    FunctionalDrift,
    /// `|h(t)|^2` on a reference grid `factor` times finer than the scheme.
    Perturbation { h: Perturbation, factor: usize },
}

impl NovikovQuantity {
    /// Id of the threshold that governs this quantity for `model`.
    pub fn threshold_id(&self, model: &SdeModel) -> &'static str {
        let hamiltonian = model.is_hamiltonian();
        let distributed = matches!(model.memory(), Memory::Distributed { .. });
        match self {
            NovikovQuantity::SegmentNorm if hamiltonian => "d11",
            NovikovQuantity::SegmentNorm => "eq11",
            NovikovQuantity::FunctionalDrift if hamiltonian => "r1",
            NovikovQuantity::FunctionalDrift if distributed => "e4",
            NovikovQuantity::FunctionalDrift => "eq12",
            NovikovQuantity::Perturbation { .. } if hamiltonian => "r7",
            NovikovQuantity::Perturbation { .. } if distributed => "e6",
            NovikovQuantity::Perturbation { .. } => "w12",
        }
    }
}

impl FromStr for NovikovQuantity {
    type Err = Error;

    /// `segment`, `drift`, `h1`, `h2:4`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["segment"] => Ok(NovikovQuantity::SegmentNorm),
            ["drift"] => Ok(NovikovQuantity::FunctionalDrift),
            [h] => Ok(NovikovQuantity::Perturbation {
                h: h.parse()?,
                factor: DEFAULT_FINE_FACTOR,
            }),
            [h, f] => Ok(NovikovQuantity::Perturbation {
                h: h.parse()?,
                factor: f
                    .parse()
                    .map_err(|_| Error::Config(format!("cannot parse fine factor `{f}`")))?,
            }),
            _ => Err(Error::Config(format!(
                "cannot parse quantity `{s}` (expected segment, drift, h<k> or h<k>:<factor>)"
            ))),
        }
    }
}

impl fmt::Display for NovikovQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NovikovQuantity::SegmentNorm => f.write_str("segment"),
            NovikovQuantity::FunctionalDrift => f.write_str("drift"),
            NovikovQuantity::Perturbation { h, factor } => write!(f, "{h}:{factor}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NovikovEstimate {
    pub quantity: NovikovQuantity,
    pub lambda: f64,
    pub t: f64,
    pub m: usize,
    /// Mean of `exp(lambda I)`; infinite when a sample overflowed.
    pub mean: f64,
    pub stderr: f64,
    /// Mean over the first half of the paths, for a doubling comparison.
    pub half_mean: f64,
    pub half_stderr: f64,
    pub max_sample: f64,
    /// Largest time integral `I` seen.
    pub max_integral: f64,
    pub overflowed: usize,
    pub n_paths: usize,
    pub threshold: Option<LambdaThreshold>,
}

impl NovikovEstimate {
    /// Some sample overflowed: the moment is empirically unbounded at lambda.
    pub fn unbounded(&self) -> bool {
        self.overflowed > 0
    }

    pub fn below_threshold(&self) -> bool {
        match &self.threshold {
            Some(LambdaThreshold {
                lambda: Some(l), ..
            }) => self.lambda < *l,
            _ => true,
        }
    }
}

/// Trapezoid rule on a uniform grid.
fn trapezoid(q: &[f64], delta: f64) -> f64 {
    match q.len() {
        0 | 1 => 0.0,
        n => delta * (q[1..n - 1].iter().sum::<f64>() + 0.5 * (q[0] + q[n - 1])),
    }
}

/// `q` at the nodes `0..=n` of a reference path.
fn quantity_along_path(
    model: &SdeModel,
    traj: &Trajectory,
    quantity: NovikovQuantity,
) -> Result<Vec<f64>> {
    let n = traj.n_steps() as i64;
    let d = model.dim();
    let mut q = Vec::with_capacity(n as usize + 1);
    match quantity {
        NovikovQuantity::SegmentNorm => {
            let window = model.history_steps(traj.m());
            let rate = match model.memory() {
                Memory::Infinite { rate, .. } => rate,
                _ => 0.0,
            };
            let hamiltonian = model.is_hamiltonian();
            let mut first = SlidingMax::new(window, rate, traj.delta());
            let mut second = SlidingMax::new(window, rate, traj.delta());
            for k in -(traj.history_steps() as i64)..=n {
                let v = traj.node(k);
                if hamiltonian {
                    first.push(k, euclid(&v[..d]));
                    second.push(k, euclid(&v[d..]));
                } else {
                    first.push(k, euclid(v));
                }
                if k >= 0 {
                    let a = first.max(k);
                    let b = if hamiltonian { second.max(k) } else { 0.0 };
                    q.push(a * a + b * b);
                }
            }
        }
        NovikovQuantity::FunctionalDrift => {
            let mut z_eval = ZEvaluator::new(model, traj, 0);
            for k in 0..=n {
                if k > 0 {
                    z_eval.push(model, traj, k);
                }
                let g = model.sigma().apply_inverse(z_eval.value(model, traj, k))?;
                q.push(g.iter().map(|v| v * v).sum());
            }
        }
        NovikovQuantity::Perturbation { h, factor } => {
            for j in 0..=n {
                let v = perturbation_h(model, traj, h, j, factor)?;
                q.push(v.iter().map(|x| x * x).sum());
            }
        }
    }
    Ok(q)
}

/// Monte Carlo estimate of `E exp(lambda int_0^T q(t) dt)` along reference
/// paths, with the time integral taken by the trapezoid rule on the grid
/// `tau / m` (refined by the fine factor for perturbations).
#[allow(clippy::too_many_arguments)]
pub fn novikov_margin(
    model: &SdeModel,
    quantity: NovikovQuantity,
    t: f64,
    m: usize,
    lambda: f64,
    n_paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<NovikovEstimate> {
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    if n_paths < 2 {
        return Err(Error::Config("need at least two paths".into()));
    }
    let m_ref = match quantity {
        NovikovQuantity::SegmentNorm => m,
        NovikovQuantity::FunctionalDrift => {
            if !model.sigma().is_invertible() {
                return Err(Error::Config("noise coefficient is not invertible".into()));
            }
            m
        }
        NovikovQuantity::Perturbation { h, factor } => {
            Variant::R2 { h, factor }.check(model)?;
            m * factor
        }
    };
    let n = grid_steps(model.tau(), m_ref, t)?;
    let integrals = map_paths(n_paths, execution, |i| {
        let run = || -> Result<f64> {
            let (traj, _) = reference_path(model, m_ref, t, n, seed, i)?;
            let q = quantity_along_path(model, &traj, quantity)?;
            let integral = trapezoid(&q, traj.delta());
            if integral.is_finite() {
                Ok(integral)
            } else {
                Err(Error::NonFinite("quantity".into()))
            }
        };
        Ok(flag_non_finite(run())?.unwrap_or(f64::INFINITY))
    })?;
    let samples: Vec<f64> = integrals.iter().map(|i| (lambda * i).exp()).collect();
    let overflowed = samples.iter().filter(|s| !s.is_finite()).count();
    let (mean, stderr, _) = mean_stderr(&samples);
    let (half_mean, half_stderr, _) = mean_stderr(&samples[..n_paths / 2]);
    let id = quantity.threshold_id(model);
    let threshold = lambda_thresholds(model, t)
        .into_iter()
        .find(|th| th.id == id);
    Ok(NovikovEstimate {
        quantity,
        lambda,
        t,
        m,
        mean: if overflowed > 0 { f64::INFINITY } else { mean },
        stderr: if overflowed > 0 {
            f64::INFINITY
        } else {
            stderr
        },
        half_mean,
        half_stderr,
        max_sample: samples.iter().cloned().fold(0.0, f64::max),
        max_integral: integrals.iter().cloned().fold(0.0, f64::max),
        overflowed,
        n_paths,
        threshold,
    })
}
