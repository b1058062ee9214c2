//! Segment (window) processes.
//!
//! A trajectory is stored on a uniform grid with spacing `delta = tau / m`;
//! times are integer node indices, negative for the initial history. A
//! [`SegmentPath`] is the window of a trajectory seen from one anchor time,
//! stored oldest value first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euclidean norm.
pub fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Returns the integer nearest to `u` when `u` is a grid index up to rounding.
pub(crate) fn snap_index(u: f64) -> Option<i64> {
    let r = u.round();
    if (u - r).abs() <= 64.0 * f64::EPSILON * u.abs().max(1.0) {
        Some(r as i64)
    } else {
        None
    }
}

/// How a window is read between its nodes and which history norm it lives in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SegmentKind {
    /// Piecewise-linear interpolation of grid values.
    LinearInterp,
    /// Values frozen after the last grid time `t_delta`; linear between nodes.
    LeftTruncated,
    /// Window of an infinite-memory path, measured with weight `e^{r theta}`.
    InfiniteWeighted { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HistoryNorm {
    Sup,
    ExpWeighted { rate: f64 },
}

/// Discretized history over `[-steps * delta, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPath {
    tau: f64,
    m: usize,
    steps: usize,
    dim: usize,
    values: Vec<f64>,
    kind: SegmentKind,
}

impl SegmentPath {
    /// Builds a window of `steps + 1` nodes on the grid `delta = tau / m`.
    /// `values` are row-major, oldest node first.
    pub fn new(
        tau: f64,
        m: usize,
        steps: usize,
        dim: usize,
        values: Vec<f64>,
        kind: SegmentKind,
    ) -> Result<Self> {
        if !(tau > 0.0) || m == 0 || dim == 0 {
            return Err(Error::Config(format!(
                "segment needs tau > 0, m >= 1, dim >= 1 (got tau={tau}, m={m}, dim={dim})"
            )));
        }
        if values.len() != (steps + 1) * dim {
            return Err(Error::Config(format!(
                "segment with {steps} steps in dimension {dim} needs {} values, got {}",
                (steps + 1) * dim,
                values.len()
            )));
        }
        if let SegmentKind::InfiniteWeighted { rate } = kind {
            if !(rate >= 0.0) {
                return Err(Error::Config(format!(
                    "weight rate must be >= 0, got {rate}"
                )));
            }
        }
        Ok(Self {
            tau,
            m,
            steps,
            dim,
            values,
            kind,
        })
    }

    /// Finite-memory window (`steps = m`) sampled from a function of `theta`.
    pub fn from_fn(
        tau: f64,
        m: usize,
        dim: usize,
        kind: SegmentKind,
        mut f: impl FnMut(f64) -> Vec<f64>,
    ) -> Result<Self> {
        let delta = tau / m as f64;
        let mut values = Vec::with_capacity((m + 1) * dim);
        for j in 0..=m {
            let lag = (m - j) as f64;
            let v = f(-lag * delta);
            if v.len() != dim {
                return Err(Error::Config(format!(
                    "segment function returned dimension {} instead of {dim}",
                    v.len()
                )));
            }
            values.extend_from_slice(&v);
        }
        Self::new(tau, m, m, dim, values, kind)
    }

    pub fn delta(&self) -> f64 {
        self.tau / self.m as f64
    }

    /// Grid unit `tau` (the memory length for finite windows).
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Length of the stored window.
    pub fn window(&self) -> f64 {
        self.steps as f64 * self.delta()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> SegmentKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Node at `theta = -lag * delta`.
    pub fn at_lag(&self, lag: usize) -> &[f64] {
        let j = self.steps - lag;
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// Reads the window at `theta`, linear between nodes, exact at nodes.
    pub fn eval(&self, theta: f64) -> Result<Vec<f64>> {
        let delta = self.delta();
        let window = self.window();
        let tol = 64.0 * f64::EPSILON * window.max(1.0);
        if theta > tol || theta < -window - tol || theta.is_nan() {
            return Err(Error::Domain(format!(
                "theta = {theta} outside [-{window}, 0]"
            )));
        }
        let u = -theta / delta;
        if let Some(i) = snap_index(u) {
            let i = i.clamp(0, self.steps as i64) as usize;
            return Ok(self.at_lag(i).to_vec());
        }
        let i = (u.floor() as usize).min(self.steps - 1);
        let a = (theta + (1 + i) as f64 * delta) / delta;
        let b = (theta + i as f64 * delta) / delta;
        let newer = self.at_lag(i);
        let older = self.at_lag(i + 1);
        Ok(newer
            .iter()
            .zip(older)
            .map(|(vn, vo)| a * vn - b * vo)
            .collect())
    }
}

/// Linear interpolation of the grid values of a window.
pub fn interpolate_segment(path: &SegmentPath, theta: f64) -> Result<Vec<f64>> {
    if path.kind != SegmentKind::LinearInterp {
        return Err(Error::Mismatch(format!(
            "interpolation requires a linear-interp segment, got {:?}",
            path.kind
        )));
    }
    path.eval(theta)
}

/// History norm over the stored grid nodes.
///
/// For a piecewise-linear window the Euclidean norm is convex on every
/// subinterval, so the node maximum is the exact sup norm.
pub fn segment_norm(path: &SegmentPath, norm: HistoryNorm) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::Domain("norm of an empty segment".into()));
    }
    let delta = path.delta();
    let mut best = 0.0_f64;
    for lag in 0..=path.steps {
        let mag = euclid(path.at_lag(lag));
        let w = match norm {
            HistoryNorm::Sup => mag,
            HistoryNorm::ExpWeighted { rate } => (-rate * lag as f64 * delta).exp() * mag,
        };
        best = best.max(w);
    }
    Ok(best)
}

/// A path stored on the grid `delta = tau / m`, from node `-history_steps`
/// (the oldest initial value) to node `n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    tau: f64,
    m: usize,
    dim: usize,
    history_steps: usize,
    n_steps: usize,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(tau: f64, m: usize, dim: usize, history_steps: usize, n_steps: usize) -> Self {
        Self {
            tau,
            m,
            dim,
            history_steps,
            n_steps,
            values: vec![0.0; (history_steps + n_steps + 1) * dim],
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.tau / self.m as f64
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn history_steps(&self) -> usize {
        self.history_steps
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Horizon `T = n_steps * delta`.
    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.delta()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[cfg(test)]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn slot(&self, k: i64) -> usize {
        let j = k + self.history_steps as i64;
        debug_assert!(j >= 0 && (j as usize) <= self.history_steps + self.n_steps);
        j as usize
    }

    pub fn contains(&self, k: i64) -> bool {
        k >= -(self.history_steps as i64) && k <= self.n_steps as i64
    }

    /// Value at grid time `k * delta`.
    pub fn node(&self, k: i64) -> &[f64] {
        let j = self.slot(k);
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn node_mut(&mut self, k: i64) -> &mut [f64] {
        let j = self.slot(k);
        let d = self.dim;
        &mut self.values[j * d..(j + 1) * d]
    }

    pub fn final_state(&self) -> &[f64] {
        self.node(self.n_steps as i64)
    }

    /// Value at an arbitrary time, linear between nodes, exact at nodes.
    pub fn value_at(&self, s: f64) -> Result<Vec<f64>> {
        let u = s / self.delta();
        if let Some(k) = snap_index(u) {
            if self.contains(k) {
                return Ok(self.node(k).to_vec());
            }
        }
        let lo = u.floor() as i64;
        if !self.contains(lo) || !self.contains(lo + 1) {
            return Err(Error::Domain(format!(
                "time {s} outside the stored trajectory [{}, {}]",
                -(self.history_steps as f64) * self.delta(),
                self.horizon()
            )));
        }
        let w = u - lo as f64;
        Ok(self
            .node(lo)
            .iter()
            .zip(self.node(lo + 1))
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect())
    }

    fn check_window(&self, oldest: i64, newest: i64) -> Result<()> {
        if !self.contains(oldest) || !self.contains(newest) {
            return Err(Error::Domain(format!(
                "window [{oldest}, {newest}] not covered by the trajectory nodes [-{}, {}]",
                self.history_steps, self.n_steps
            )));
        }
        Ok(())
    }

    /// Exact segment at node `k` over the last `steps` grid intervals.
    pub fn segment(&self, k: i64, steps: usize, kind: SegmentKind) -> Result<SegmentPath> {
        let oldest = k - steps as i64;
        self.check_window(oldest, k)?;
        let a = self.slot(oldest) * self.dim;
        let b = (self.slot(k) + 1) * self.dim;
        SegmentPath::new(
            self.tau,
            self.m,
            steps,
            self.dim,
            self.values[a..b].to_vec(),
            kind,
        )
    }

    /// Interpolated segment anchored at node `k` built from the coarse grid
    /// with spacing `factor * delta`. `k` must be a coarse grid node.
    pub fn interpolated_segment(&self, k: i64, factor: usize) -> Result<SegmentPath> {
        if factor == 0 || !self.m.is_multiple_of(factor) {
            return Err(Error::Config(format!(
                "coarsening factor {factor} does not divide m = {}",
                self.m
            )));
        }
        if k.rem_euclid(factor as i64) != 0 {
            return Err(Error::Domain(format!(
                "interpolation anchor {k} is not a node of the coarse grid (factor {factor})"
            )));
        }
        let mc = self.m / factor;
        let oldest = k - (mc * factor) as i64;
        self.check_window(oldest, k)?;
        let mut values = Vec::with_capacity((mc + 1) * self.dim);
        for j in 0..=mc {
            values.extend_from_slice(self.node(oldest + (j * factor) as i64));
        }
        SegmentPath::new(
            self.tau,
            mc,
            mc,
            self.dim,
            values,
            SegmentKind::LinearInterp,
        )
    }

    /// Left-truncated segment at node `k`: the window of `steps` intervals on
    /// this grid with values `X(s ∧ t_delta)`, `t_delta` the last node of the
    /// coarse grid (spacing `factor * delta`) not after `k`.
    pub fn truncated_segment(
        &self,
        k: i64,
        factor: usize,
        steps: usize,
        kind: SegmentKind,
    ) -> Result<SegmentPath> {
        if factor == 0 {
            return Err(Error::Config("coarsening factor must be >= 1".into()));
        }
        let oldest = k - steps as i64;
        self.check_window(oldest, k)?;
        let k_delta = k.div_euclid(factor as i64) * factor as i64;
        let mut values = Vec::with_capacity((steps + 1) * self.dim);
        for s in oldest..=k {
            values.extend_from_slice(self.node(s.min(k_delta)));
        }
        SegmentPath::new(self.tau, self.m, steps, self.dim, values, kind)
    }
}

/// `X((t + theta) ∧ t_delta)` with `t_delta = floor(t / delta) * delta`.
pub fn truncated_segment_eval(
    traj: &Trajectory,
    t: f64,
    theta: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!(
            "stepsize must be positive, got {delta}"
        )));
    }
    if theta > 0.0 || t < 0.0 {
        return Err(Error::Domain(format!(
            "need theta <= 0 and t >= 0, got theta = {theta}, t = {t}"
        )));
    }
    let u = t / delta;
    let steps = snap_index(u).map(|k| k as f64).unwrap_or_else(|| u.floor());
    let t_delta = steps * delta;
    traj.value_at((t + theta).min(t_delta))
}

/// Checks `‖Ŷ_{t_δ}‖_∞ ≤ ‖Y_t‖_∞ ∨ ‖Y_{t−τ}‖_∞` at node `k`, where the
/// interpolated segment is built from the coarse grid with spacing
/// `factor * delta` and the exact segments use every node of `traj`.
pub fn interpolated_norm_bound_check(traj: &Trajectory, k: i64, factor: usize) -> Result<bool> {
    let m = traj.m();
    if factor == 0 || !m.is_multiple_of(factor) {
        return Err(Error::Config(format!(
            "coarsening factor {factor} does not divide m = {m}"
        )));
    }
    let anchor = k.div_euclid(factor as i64) * factor as i64;
    let interp = traj.interpolated_segment(anchor, factor)?;
    let current = traj.segment(k, m, SegmentKind::LinearInterp)?;
    let previous = traj.segment(k - m as i64, m, SegmentKind::LinearInterp)?;
    let lhs = segment_norm(&interp, HistoryNorm::Sup)?;
    let rhs =
        segment_norm(&current, HistoryNorm::Sup)?.max(segment_norm(&previous, HistoryNorm::Sup)?);
    Ok(lhs <= rhs)
}
