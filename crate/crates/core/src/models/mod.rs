//! SDE problem definitions: local drift, path functional, additive noise,
//! memory kind and initial history, together with the structural constants
//! that enter the admissible-horizon and exponential-moment thresholds.

mod catalog;
mod horizon;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::{euclid, segment_norm, HistoryNorm, SegmentKind, SegmentPath};

pub use catalog::{builtin_model, manifest, overrides, ModelSpec, ParamKind, ParamSpec};
pub use horizon::{
    admissible_horizon, lambda_thresholds, regime, AdmissibleHorizon, LambdaThreshold, Regime,
    RegimeTag, Theorem,
};

/// Constant additive diffusion matrix with its inverse and Hilbert-Schmidt norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Sigma {
    dim: usize,
    matrix: Vec<f64>,
    inverse: Option<Vec<f64>>,
    hs: f64,
    inverse_hs: Option<f64>,
}

impl Sigma {
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut rows = vec![0.0; dim * dim];
        for i in 0..dim {
            rows[i * dim + i] = scale;
        }
        Self::from_rows(dim, rows)
    }

    /// Row-major `dim x dim` matrix. Singular matrices are accepted; the
    /// inverse is then absent and change-of-measure operations refuse them.
    pub fn from_rows(dim: usize, rows: Vec<f64>) -> Self {
        assert_eq!(rows.len(), dim * dim, "sigma needs dim*dim entries");
        let m = DMatrix::from_row_slice(dim, dim, &rows);
        let inverse = m
            .clone()
            .try_inverse()
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
            .map(|inv| {
                let mut out = Vec::with_capacity(dim * dim);
                for i in 0..dim {
                    for j in 0..dim {
                        out.push(inv[(i, j)]);
                    }
                }
                out
            });
        let hs = euclid(&rows);
        let inverse_hs = inverse.as_deref().map(euclid);
        Self {
            dim,
            matrix: rows,
            inverse,
            hs,
            inverse_hs,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[f64] {
        &self.matrix
    }

    pub fn hs(&self) -> f64 {
        self.hs
    }

    pub fn inverse_hs(&self) -> Option<f64> {
        self.inverse_hs
    }

    pub fn is_invertible(&self) -> bool {
        self.inverse.is_some()
    }

    /// `out += sigma * v`
    #[inline]
    pub fn apply_add(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (o, row) in out.iter_mut().zip(self.matrix.chunks_exact(d)) {
            *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_add(v, &mut out);
        out
    }

    pub fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        let inv = self
            .inverse
            .as_ref()
            .ok_or_else(|| Error::Config("diffusion matrix is singular".into()))?;
        let d = self.dim;
        Ok((0..d)
            .map(|i| {
                inv[i * d..(i + 1) * d]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Row-major `sigma sigma^T`.
    pub fn gram(&self) -> Vec<f64> {
        let d = self.dim;
        let mut g = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                g[i * d + j] = (0..d)
                    .map(|k| self.matrix[i * d + k] * self.matrix[j * d + k])
                    .sum();
            }
        }
        g
    }

    fn gram_eigen_range(&self) -> (f64, f64) {
        let d = self.dim;
        let g = DMatrix::from_row_slice(d, d, &self.gram());
        let eig = SymmetricEigen::new(g).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Memoryless drift part `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LocalDrift {
    Zero,
    /// `b(x) = a x`
    Linear {
        a: f64,
    },
    /// Velocity drift of the Hamiltonian system, `b(x, y) = -a1 x - a2 y`.
    Damped {
        a1: f64,
        a2: f64,
    },
    /// Gradient drift `-(sigma sigma^T) grad V` for `V(x) = c |x|^2`.
    Gradient {
        c: f64,
    },
}

/// Path functional `Z`. Every variant is `coeff * (Hölder map)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Functional {
    Zero,
    /// Componentwise `coeff * |xi(-lag)|^alpha`.
    PointDelay {
        coeff: f64,
        alpha: f64,
        lag: f64,
    },
    /// `coeff * ‖xi‖_∞^alpha` along the unit diagonal.
    SupNorm {
        coeff: f64,
        alpha: f64,
    },
    /// `coeff * ‖xi‖_r^alpha` along the unit diagonal, `r` from the memory.
    WeightedSup {
        coeff: f64,
        alpha: f64,
    },
    /// `∫ z(xi(theta)) rho(dtheta)` with componentwise `z(x) = coeff |x|^alpha`.
    Averaged {
        coeff: f64,
        alpha: f64,
    },
    /// Hamiltonian pair `coeff * (‖xi‖_∞^alpha + ‖eta‖_∞^alpha)` along the unit diagonal.
    PairSup {
        coeff: f64,
        alpha: f64,
    },
}

impl Functional {
    pub fn is_zero(&self) -> bool {
        match *self {
            Functional::Zero => true,
            Functional::PointDelay { coeff, .. }
            | Functional::SupNorm { coeff, .. }
            | Functional::WeightedSup { coeff, .. }
            | Functional::Averaged { coeff, .. }
            | Functional::PairSup { coeff, .. } => coeff == 0.0,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Functional::Zero => None,
            Functional::PointDelay { alpha, .. }
            | Functional::SupNorm { alpha, .. }
            | Functional::WeightedSup { alpha, .. }
            | Functional::Averaged { alpha, .. }
            | Functional::PairSup { alpha, .. } => Some(alpha),
        }
    }
}

/// Delay measure of the distributed-delay drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Rho {
    /// Uniform probability on `[-tau, 0]`.
    Uniform,
    /// Dirac mass at `-lag`.
    Point { lag: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Memory {
    Finite,
    /// Infinite memory measured in `‖·‖_r`, stored on `[-history, 0]`.
    Infinite {
        rate: f64,
        history: f64,
    },
    Hamiltonian,
    Distributed {
        rho: Rho,
    },
}

/// Initial history `xi` on `[-tau, 0]` (or on the stored history for infinite
/// memory). For Hamiltonian models the value is the stacked pair `(xi, eta)`.
#[derive(Clone)]
pub enum InitialSegment {
    Constant(Vec<f64>),
    /// `xi(theta) = at_zero + slope * theta`
    Affine {
        at_zero: Vec<f64>,
        slope: Vec<f64>,
    },
    /// `before` for `theta < jump_at`, `after` otherwise.
    Step {
        before: Vec<f64>,
        after: Vec<f64>,
        jump_at: f64,
    },
    Custom(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

impl fmt::Debug for InitialSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSegment::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            InitialSegment::Affine { at_zero, slope } => f
                .debug_struct("Affine")
                .field("at_zero", at_zero)
                .field("slope", slope)
                .finish(),
            InitialSegment::Step {
                before,
                after,
                jump_at,
            } => f
                .debug_struct("Step")
                .field("before", before)
                .field("after", after)
                .field("jump_at", jump_at)
                .finish(),
            InitialSegment::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl InitialSegment {
    pub fn eval(&self, theta: f64) -> Vec<f64> {
        match self {
            InitialSegment::Constant(v) => v.clone(),
            InitialSegment::Affine { at_zero, slope } => at_zero
                .iter()
                .zip(slope)
                .map(|(a, s)| a + s * theta)
                .collect(),
            InitialSegment::Step {
                before,
                after,
                jump_at,
            } => {
                if theta < *jump_at {
                    before.clone()
                } else {
                    after.clone()
                }
            }
            InitialSegment::Custom(f) => f(theta),
        }
    }

    /// Lipschitz constant when known in closed form.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            InitialSegment::Constant(_) => Some(0.0),
            InitialSegment::Affine { slope, .. } => Some(euclid(slope)),
            InitialSegment::Step { before, after, .. } => {
                if before == after {
                    Some(0.0)
                } else {
                    None
                }
            }
            InitialSegment::Custom(_) => None,
        }
    }
}

/// Structural constants of a model. Absent entries are not defined for it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Lipschitz constant of `b`.
    pub l1: Option<f64>,
    /// Hölder constant of `Z` in the sup norm.
    pub l2: Option<f64>,
    /// Dissipativity `2<x, b(x)> <= c + beta |x|^2`.
    pub beta: Option<f64>,
    pub c: Option<f64>,
    /// Hölder exponent of `Z`.
    pub alpha: Option<f64>,
    /// Lipschitz constant of the initial segment.
    pub l3: Option<f64>,
    /// Hölder constant of `Z` in the weighted norm.
    pub l4: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    /// Lyapunov weights of the Hamiltonian dissipativity condition.
    pub lyap_alpha: Option<f64>,
    pub lyap_beta: Option<f64>,
    pub lyap_gamma: Option<f64>,
    pub lyap_lambda: Option<f64>,
    /// Lipschitz constant of the gradient drift.
    pub l0: Option<f64>,
    /// Exponential integrability level of `|Z|^2` under the invariant measure.
    pub kappa: Option<f64>,
    /// Polynomial growth exponent of the Hölder modulus.
    pub m: Option<f64>,
    pub r: Option<f64>,
}

/// `kappa_1`, `kappa_2`, `kappa_3` of the Lyapunov function
/// `W(x, y) = a/2 |x|^2 + b/2 |y|^2 + g <x, y>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConstants {
    pub kappa1: f64,
    /// Lower constant from the Young-inequality split; used for all checks.
    pub kappa2: f64,
    /// Lower constant with the alternative second branch `b - 2|g| / S`.
    pub kappa2_alt: f64,
    pub kappa3: f64,
}

impl LyapunovConstants {
    pub fn new(a: f64, b: f64, g: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Config(format!(
                "Lyapunov weights must be positive, got alpha={a}, beta={b}"
            )));
        }
        if !(g.abs() < a * b) {
            return Err(Error::Config(format!(
                "gamma = {g} outside (-alpha*beta, alpha*beta) = (-{p}, {p})",
                p = a * b
            )));
        }
        let kappa1 = (1.0 + a) * (1.0 + b) / 2.0;
        let (kappa2, kappa2_alt) = if g == 0.0 {
            (a.min(b) / 2.0, a.min(b) / 2.0)
        } else {
            let s = a / g.abs() + g.abs() / b;
            let first = a - 0.5 * s;
            (
                0.5 * first.min(b - 2.0 * g * g / s),
                0.5 * first.min(b - 2.0 * g.abs() / s),
            )
        };
        Ok(Self {
            kappa1,
            kappa2,
            kappa2_alt,
            kappa3: (g * g).max(b * b),
        })
    }

    pub fn w(a: f64, b: f64, g: f64, x: &[f64], y: &[f64]) -> f64 {
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let xy: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        0.5 * a * xx + 0.5 * b * yy + g * xy
    }
}

/// Resolved parameter value, kept for report provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Real(f64),
    Int(usize),
    Choice(String),
}

/// One SDE problem. Immutable once built.
#[derive(Debug, Clone)]
pub struct SdeModel {
    name: String,
    dim: usize,
    tau: f64,
    drift: LocalDrift,
    functional: Functional,
    sigma: Sigma,
    gram: Vec<f64>,
    memory: Memory,
    constants: Constants,
    initial: InitialSegment,
    params: BTreeMap<String, ParamValue>,
}

#[inline]
pub(crate) fn holder_pow(s: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        s
    } else {
        s.powf(alpha)
    }
}

impl SdeModel {
    /// Assembles a model and checks that its parts fit together.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        tau: f64,
        drift: LocalDrift,
        functional: Functional,
        sigma: Sigma,
        memory: Memory,
        constants: Constants,
        initial: InitialSegment,
    ) -> Result<Self> {
        if dim == 0 || !(tau > 0.0) {
            return Err(Error::Config(format!(
                "need dim >= 1 and tau > 0 (got dim={dim}, tau={tau})"
            )));
        }
        if sigma.dim() != dim {
            return Err(Error::Config(format!(
                "sigma is {0}x{0} but the model dimension is {dim}",
                sigma.dim()
            )));
        }
        if let Some(alpha) = functional.alpha() {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::Config(format!(
                    "Hölder exponent {alpha} not in (0, 1]"
                )));
            }
        }
        let hamiltonian = matches!(memory, Memory::Hamiltonian);
        let drift_ok = match drift {
            LocalDrift::Damped { .. } => hamiltonian,
            LocalDrift::Gradient { .. } => !hamiltonian,
            LocalDrift::Zero | LocalDrift::Linear { .. } => true,
        };
        let functional_ok = match (functional, memory) {
            (Functional::Zero, _) => true,
            (Functional::PointDelay { lag, .. }, Memory::Finite) => {
                lag > 0.0 && lag <= tau * (1.0 + 1e-12)
            }
            (Functional::SupNorm { .. }, Memory::Finite) => true,
            (Functional::WeightedSup { .. }, Memory::Infinite { .. }) => true,
            (Functional::Averaged { .. }, Memory::Distributed { .. }) => true,
            (Functional::PairSup { .. }, Memory::Hamiltonian) => true,
            _ => false,
        };
        if !drift_ok || !functional_ok {
            return Err(Error::Mismatch(format!(
                "drift {drift:?} / functional {functional:?} not compatible with memory {memory:?}"
            )));
        }
        match memory {
            Memory::Infinite { rate, history } => {
                if !(rate > 0.0 && history >= tau) {
                    return Err(Error::Config(format!(
                        "infinite memory needs r > 0 and a stored history >= tau (r={rate}, history={history})"
                    )));
                }
            }
            Memory::Distributed {
                rho: Rho::Point { lag },
            } if !(lag >= 0.0 && lag <= tau * (1.0 + 1e-12)) => {
                return Err(Error::Config(format!(
                    "point mass lag {lag} outside [0, tau]"
                )));
            }
            _ => {}
        }
        let state_dim = if hamiltonian { 2 * dim } else { dim };
        if initial.eval(0.0).len() != state_dim {
            return Err(Error::Config(format!(
                "initial segment has dimension {} but the state dimension is {state_dim}",
                initial.eval(0.0).len()
            )));
        }
        let gram = sigma.gram();
        Ok(Self {
            name: name.into(),
            dim,
            tau,
            drift,
            functional,
            sigma,
            gram,
            memory,
            constants,
            initial,
            params: BTreeMap::new(),
        })
    }

    pub(crate) fn with_params(mut self, params: BTreeMap<String, ParamValue>) -> Self {
        self.params = params;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Noise dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `2d` for Hamiltonian models, `d` otherwise.
    pub fn state_dim(&self) -> usize {
        if self.is_hamiltonian() {
            2 * self.dim
        } else {
            self.dim
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn drift(&self) -> LocalDrift {
        self.drift
    }

    pub fn functional(&self) -> Functional {
        self.functional
    }

    pub fn sigma(&self) -> &Sigma {
        &self.sigma
    }

    pub fn memory(&self) -> Memory {
        self.memory
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn initial(&self) -> &InitialSegment {
        &self.initial
    }

    pub fn params(&self) -> &BTreeMap<String, ParamValue> {
        &self.params
    }

    pub fn is_hamiltonian(&self) -> bool {
        matches!(self.memory, Memory::Hamiltonian)
    }

    /// Number of grid intervals of stored history for stepsize `tau / m`.
    pub fn history_steps(&self, m: usize) -> usize {
        match self.memory {
            Memory::Infinite { history, .. } => {
                let units = (history / self.tau - 1e-9).ceil().max(1.0) as usize;
                units * m
            }
            _ => m,
        }
    }

    /// Segment kind the functional is read with.
    pub fn segment_kind(&self) -> SegmentKind {
        match self.memory {
            Memory::Infinite { rate, .. } => SegmentKind::InfiniteWeighted { rate },
            _ => SegmentKind::LinearInterp,
        }
    }

    /// The reference dynamics: same model with the path functional removed.
    pub fn reference(&self) -> SdeModel {
        let mut m = self.clone();
        m.functional = Functional::Zero;
        m.name = format!("{}/reference", self.name);
        m
    }

    /// Copy of the model with a different initial segment.
    pub fn with_initial(&self, initial: InitialSegment) -> Result<SdeModel> {
        if initial.eval(0.0).len() != self.state_dim() {
            return Err(Error::Config("initial segment dimension mismatch".into()));
        }
        let mut m = self.clone();
        m.initial = initial;
        Ok(m)
    }

    /// Writes `b` at `state` into `out` (length `d`).
    #[inline]
    pub fn local_drift(&self, state: &[f64], out: &mut [f64]) {
        match self.drift {
            LocalDrift::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            LocalDrift::Linear { a } => {
                for (o, x) in out.iter_mut().zip(state) {
                    *o = a * x;
                }
            }
            LocalDrift::Damped { a1, a2 } => {
                let d = self.dim;
                for i in 0..d {
                    out[i] = -a1 * state[i] - a2 * state[d + i];
                }
            }
            LocalDrift::Gradient { c } => {
                let d = self.dim;
                for (o, row) in out.iter_mut().zip(self.gram.chunks_exact(d)) {
                    *o = -2.0 * c * row.iter().zip(state).map(|(g, x)| g * x).sum::<f64>();
                }
            }
        }
    }

    /// Componentwise `coeff |x|^alpha` integrated by the distributed functional.
    #[inline]
    pub fn pointwise_z(&self, x: &[f64], out: &mut [f64]) {
        match self.functional {
            Functional::Averaged { coeff, alpha } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = coeff * holder_pow(v.abs(), alpha);
                }
            }
            _ => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    /// Unit diagonal direction `(1, ..., 1) / sqrt(d)`.
    pub(crate) fn diagonal(&self) -> f64 {
        1.0 / (self.dim as f64).sqrt()
    }

    /// Potential `V` of the gradient drift, if any.
    pub fn potential(&self, x: &[f64]) -> Option<f64> {
        match self.drift {
            LocalDrift::Gradient { c } => Some(c * x.iter().map(|v| v * v).sum::<f64>()),
            _ => None,
        }
    }
}

/// Evaluates the path functional `Z` on one window.
pub fn evaluate_functional_drift(model: &SdeModel, segment: &SegmentPath) -> Result<Vec<f64>> {
    let d = model.dim();
    if segment.dim() != model.state_dim() {
        return Err(Error::Mismatch(format!(
            "segment dimension {} but the model state dimension is {}",
            segment.dim(),
            model.state_dim()
        )));
    }
    let infinite = matches!(segment.kind(), SegmentKind::InfiniteWeighted { .. });
    let expects_infinite = matches!(model.memory(), Memory::Infinite { .. });
    if infinite != expects_infinite {
        return Err(Error::Mismatch(format!(
            "segment kind {:?} does not match memory {:?}",
            segment.kind(),
            model.memory()
        )));
    }
    if !expects_infinite && (segment.window() - model.tau()).abs() > 1e-9 * model.tau() {
        return Err(Error::Mismatch(format!(
            "segment window {} differs from the memory length {}",
            segment.window(),
            model.tau()
        )));
    }
    let u = model.diagonal();
    let mut out = vec![0.0; d];
    match model.functional() {
        Functional::Zero => {}
        Functional::PointDelay { coeff, alpha, lag } => {
            let v = segment.eval(-lag)?;
            for (o, x) in out.iter_mut().zip(&v) {
                *o = coeff * holder_pow(x.abs(), alpha);
            }
        }
        Functional::SupNorm { coeff, alpha } => {
            let s = segment_norm(segment, HistoryNorm::Sup)?;
            out.iter_mut()
                .for_each(|o| *o = coeff * holder_pow(s, alpha) * u);
        }
        Functional::WeightedSup { coeff, alpha } => {
            let rate = match segment.kind() {
                SegmentKind::InfiniteWeighted { rate } => rate,
                _ => unreachable!(),
            };
            let s = segment_norm(segment, HistoryNorm::ExpWeighted { rate })?;
            out.iter_mut()
                .for_each(|o| *o = coeff * holder_pow(s, alpha) * u);
        }
        Functional::Averaged { .. } => {
            let rho = match model.memory() {
                Memory::Distributed { rho } => rho,
                _ => unreachable!(),
            };
            let mut z = vec![0.0; d];
            match rho {
                Rho::Point { lag } => {
                    let v = segment.eval(-lag)?;
                    model.pointwise_z(&v, &mut out);
                }
                Rho::Uniform => {
                    let n = segment.steps();
                    let mut sum = vec![0.0; d];
                    for lag in 0..=n {
                        model.pointwise_z(segment.at_lag(lag), &mut z);
                        let w = if lag == 0 || lag == n { 0.5 } else { 1.0 };
                        for (s, zi) in sum.iter_mut().zip(&z) {
                            *s += w * zi;
                        }
                    }
                    let scale = segment.delta() / segment.window();
                    for (o, s) in out.iter_mut().zip(&sum) {
                        *o = scale * s;
                    }
                }
            }
        }
        Functional::PairSup { coeff, alpha } => {
            let mut sx = 0.0_f64;
            let mut sy = 0.0_f64;
            for lag in 0..=segment.steps() {
                let v = segment.at_lag(lag);
                sx = sx.max(euclid(&v[..d]));
                sy = sy.max(euclid(&v[d..]));
            }
            let val = coeff * (holder_pow(sx, alpha) + holder_pow(sy, alpha)) * u;
            out.iter_mut().for_each(|o| *o = val);
        }
    }
    Ok(out)
}
