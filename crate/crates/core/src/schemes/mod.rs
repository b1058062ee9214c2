//! Time-stepping schemes driven by externally supplied Brownian increments.
//!
//! All schemes freeze the drift at the last grid time and read the path
//! functional on the node segment there; at grid anchors the interpolated
//! and the left-truncated segments coincide with the node segment.

mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub(crate) use state::{SlidingMax, ZEvaluator};

use crate::error::{Error, Result};
use crate::models::{evaluate_functional_drift, Memory, SdeModel, Theorem};
use crate::rng::BrownianPath;
use crate::segment::{snap_index, SegmentKind, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// EM with the linearly interpolated segment.
    Interp,
    /// EM with the left-truncated segment.
    Trunc,
    /// Hamiltonian scheme, position integrated by variation of constants.
    Hamiltonian,
    /// Hamiltonian scheme with a plain Euler position update.
    HamiltonianEuler,
}

impl SchemeKind {
    pub fn id(self) -> &'static str {
        match self {
            SchemeKind::Interp => "interp",
            SchemeKind::Trunc => "trunc",
            SchemeKind::Hamiltonian => "hamiltonian",
            SchemeKind::HamiltonianEuler => "hamiltonian-euler",
        }
    }

    /// Checks that the scheme applies to the model's memory kind.
    pub fn check(self, model: &SdeModel) -> Result<()> {
        let ok = match self {
            SchemeKind::Interp => matches!(model.memory(), Memory::Finite),
            SchemeKind::Trunc => matches!(
                model.memory(),
                Memory::Finite | Memory::Infinite { .. } | Memory::Distributed { .. }
            ),
            SchemeKind::Hamiltonian | SchemeKind::HamiltonianEuler => model.is_hamiltonian(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Mismatch(format!(
                "scheme `{}` does not apply to memory {:?} of model `{}`",
                self.id(),
                model.memory(),
                model.name()
            )))
        }
    }

    /// Theorem whose rate the scheme is measured against.
    pub fn theorem(self, model: &SdeModel) -> Result<Theorem> {
        self.check(model)?;
        Ok(match (self, model.memory()) {
            (SchemeKind::Interp, _) => Theorem::Th1,
            (SchemeKind::Trunc, Memory::Infinite { .. }) => Theorem::Th3,
            (SchemeKind::Trunc, Memory::Distributed { .. }) => Theorem::Th5,
            (SchemeKind::Trunc, _) => Theorem::Th2,
            _ => Theorem::Th4,
        })
    }

    /// Scheme used for the fine-grid reference of a model.
    pub fn reference_for(model: &SdeModel) -> SchemeKind {
        if model.is_hamiltonian() {
            SchemeKind::Hamiltonian
        } else {
            SchemeKind::Trunc
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "interp" | "em" | "interpolated" => Ok(SchemeKind::Interp),
            "trunc" | "truncated" => Ok(SchemeKind::Trunc),
            "hamiltonian" => Ok(SchemeKind::Hamiltonian),
            "hamiltonian-euler" => Ok(SchemeKind::HamiltonianEuler),
            other => Err(Error::Config(format!(
                "unknown scheme `{other}` (expected interp, trunc, hamiltonian, hamiltonian-euler)"
            ))),
        }
    }
}

/// How the path functional is evaluated during stepping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    /// Sliding-window updates, amortized O(1) per step.
    #[default]
    Incremental,
    /// Rebuilds the segment at every step, O(M) per step.
    General,
}

/// Number of grid steps `T / delta`, required to be an integer.
pub fn grid_steps(tau: f64, m: usize, t: f64) -> Result<usize> {
    if !(t >= 0.0) || m == 0 {
        return Err(Error::Config(format!(
            "need T >= 0 and M >= 1, got T = {t}, M = {m}"
        )));
    }
    let u = t * m as f64 / tau;
    match snap_index(u) {
        Some(n) => Ok(n as usize),
        None => Err(Error::Config(format!(
            "T = {t} is not a multiple of the stepsize tau / M = {}",
            tau / m as f64
        ))),
    }
}

/// Empty trajectory on `[-history, T]` with the initial segment sampled.
pub fn initial_trajectory(model: &SdeModel, m: usize, n_steps: usize) -> Trajectory {
    let history = model.history_steps(m);
    let mut traj = Trajectory::zeros(model.tau(), m, model.state_dim(), history, n_steps);
    let delta = traj.delta();
    for j in -(history as i64)..=0 {
        let v = model.initial().eval(j as f64 * delta);
        traj.node_mut(j).copy_from_slice(&v);
    }
    traj
}

fn check_step(traj: &Trajectory, k: usize) -> Result<()> {
    if k >= traj.n_steps() {
        return Err(Error::Domain(format!(
            "step index {k} outside 0..{}",
            traj.n_steps()
        )));
    }
    Ok(())
}

fn euler_update(model: &SdeModel, x: &[f64], drift: &[f64], delta: f64, dw: &[f64]) -> Vec<f64> {
    let mut next: Vec<f64> = x
        .iter()
        .zip(drift)
        .map(|(xi, bi)| xi + bi * delta)
        .collect();
    model.sigma().apply_add(dw, &mut next);
    next
}

/// One EM step with the interpolated segment at the grid anchor `k`.
pub fn em_interpolated_step(
    model: &SdeModel,
    traj: &Trajectory,
    k: usize,
    dw: &[f64],
) -> Result<Vec<f64>> {
    SchemeKind::Interp.check(model)?;
    check_step(traj, k)?;
    let seg = traj.interpolated_segment(k as i64, 1)?;
    let z = evaluate_functional_drift(model, &seg)?;
    let x = traj.node(k as i64);
    let mut b = vec![0.0; model.dim()];
    model.local_drift(x, &mut b);
    let drift: Vec<f64> = b.iter().zip(&z).map(|(p, q)| p + q).collect();
    Ok(euler_update(model, x, &drift, traj.delta(), dw))
}

/// One truncated EM step at grid index `k`.
pub fn truncated_em_step(
    model: &SdeModel,
    traj: &Trajectory,
    k: usize,
    dw: &[f64],
) -> Result<Vec<f64>> {
    SchemeKind::Trunc.check(model)?;
    check_step(traj, k)?;
    let steps = model.history_steps(traj.m());
    let kind = match model.segment_kind() {
        SegmentKind::LinearInterp => SegmentKind::LeftTruncated,
        other => other,
    };
    let seg = traj.truncated_segment(k as i64, 1, steps, kind)?;
    let z = evaluate_functional_drift(model, &seg)?;
    let x = traj.node(k as i64);
    let mut b = vec![0.0; model.dim()];
    model.local_drift(x, &mut b);
    let drift: Vec<f64> = b.iter().zip(&z).map(|(p, q)| p + q).collect();
    Ok(euler_update(model, x, &drift, traj.delta(), dw))
}

/// Writes the Hamiltonian update of `(x, y)` with velocity drift `drift`.
#[inline]
fn hamiltonian_update(
    model: &SdeModel,
    state: &[f64],
    drift: &[f64],
    delta: f64,
    dw: &[f64],
    euler_position: bool,
    next: &mut [f64],
) {
    let d = model.dim();
    let (x, y) = state.split_at(d);
    let (nx, ny) = next.split_at_mut(d);
    ny.copy_from_slice(y);
    for (v, b) in ny.iter_mut().zip(drift) {
        *v += b * delta;
    }
    model.sigma().apply_add(dw, ny);
    if euler_position {
        for i in 0..d {
            nx[i] = x[i] + (x[i] + y[i]) * delta;
        }
    } else {
        // Exact flow of dX = (X + Y)dt with Y(s) = y + drift s + sigma W(s);
        // the Brownian convolution is replaced by its mean given the increment.
        let e = delta.exp();
        let e1 = delta.exp_m1();
        let e2 = e1 - delta;
        let noise_weight = e2 / delta;
        nx.fill(0.0);
        model.sigma().apply_add(dw, nx);
        for i in 0..d {
            nx[i] = e * x[i] + e1 * y[i] + e2 * drift[i] + noise_weight * nx[i];
        }
    }
}

/// One Hamiltonian step at grid index `k`; returns the stacked `(x, y)`.
pub fn hamiltonian_step(
    model: &SdeModel,
    traj: &Trajectory,
    k: usize,
    dw: &[f64],
    euler_position: bool,
) -> Result<Vec<f64>> {
    SchemeKind::Hamiltonian.check(model)?;
    check_step(traj, k)?;
    let seg = traj.truncated_segment(k as i64, 1, traj.m(), SegmentKind::LinearInterp)?;
    let z = evaluate_functional_drift(model, &seg)?;
    let state = traj.node(k as i64);
    let mut b = vec![0.0; model.dim()];
    model.local_drift(state, &mut b);
    let drift: Vec<f64> = b.iter().zip(&z).map(|(p, q)| p + q).collect();
    let mut next = vec![0.0; model.state_dim()];
    hamiltonian_update(
        model,
        state,
        &drift,
        traj.delta(),
        dw,
        euler_position,
        &mut next,
    );
    Ok(next)
}

/// A scheme at stepsize `tau / m` run up to horizon `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeRun {
    pub scheme: SchemeKind,
    pub m: usize,
    pub t: f64,
}

impl SchemeRun {
    pub fn new(scheme: SchemeKind, m: usize, t: f64) -> Self {
        Self { scheme, m, t }
    }

    pub fn run(&self, model: &SdeModel, brownian: &BrownianPath) -> Result<Trajectory> {
        simulate(model, self.scheme, self.m, self.t, brownian)
    }
}

/// Simulates the scheme on `[0, t]` with stepsize `tau / m`, using the
/// increments of `brownian` summed to the scheme grid.
pub fn simulate(
    model: &SdeModel,
    scheme: SchemeKind,
    m: usize,
    t: f64,
    brownian: &BrownianPath,
) -> Result<Trajectory> {
    simulate_with(model, scheme, m, t, brownian, Route::Incremental)
}

pub fn simulate_with(
    model: &SdeModel,
    scheme: SchemeKind,
    m: usize,
    t: f64,
    brownian: &BrownianPath,
    route: Route,
) -> Result<Trajectory> {
    scheme.check(model)?;
    let n = grid_steps(model.tau(), m, t)?;
    let factor = coupling_factor(model, m, brownian)?;
    if brownian.n_steps() < n * factor {
        return Err(Error::Domain(format!(
            "horizon {t} exceeds the Brownian path coverage {}",
            brownian.horizon()
        )));
    }
    let mut traj = initial_trajectory(model, m, n);
    let delta = traj.delta();
    let d = model.dim();
    let mut dw = vec![0.0; d];
    match route {
        Route::General => {
            for k in 0..n {
                brownian.coarse_increment(factor, k, &mut dw);
                let next = match scheme {
                    SchemeKind::Interp => em_interpolated_step(model, &traj, k, &dw)?,
                    SchemeKind::Trunc => truncated_em_step(model, &traj, k, &dw)?,
                    SchemeKind::Hamiltonian => hamiltonian_step(model, &traj, k, &dw, false)?,
                    SchemeKind::HamiltonianEuler => hamiltonian_step(model, &traj, k, &dw, true)?,
                };
                traj.node_mut(k as i64 + 1).copy_from_slice(&next);
            }
        }
        Route::Incremental => {
            // The noise-driven component is kept as start + accumulated drift
            // + sigma W(t_k), with W summed on the Brownian grid, so that
            // drift-free paths agree bit for bit across levels.
            let mut z_eval = ZEvaluator::new(model, &traj, 0);
            let mut drift = vec![0.0; d];
            let mut next = vec![0.0; model.state_dim()];
            let hamiltonian = model.is_hamiltonian();
            let euler_position = scheme == SchemeKind::HamiltonianEuler;
            let offset = if hamiltonian { d } else { 0 };
            let start: Vec<f64> = traj.node(0)[offset..offset + d].to_vec();
            let mut acc = vec![0.0; d];
            let mut w = vec![0.0; d];
            let mut sw = vec![0.0; d];
            for k in 0..n {
                let ki = k as i64;
                let z = z_eval.value(model, &traj, ki);
                let state = traj.node(ki);
                model.local_drift(state, &mut drift);
                for (b, zi) in drift.iter_mut().zip(z) {
                    *b += zi;
                }
                if hamiltonian {
                    brownian.coarse_increment(factor, k, &mut dw);
                    hamiltonian_update(model, state, &drift, delta, &dw, euler_position, &mut next);
                }
                brownian.advance(factor, k, &mut w);
                sw.fill(0.0);
                model.sigma().apply_add(&w, &mut sw);
                for i in 0..d {
                    acc[i] += drift[i] * delta;
                    next[offset + i] = (start[i] + acc[i]) + sw[i];
                }
                traj.node_mut(ki + 1).copy_from_slice(&next);
                z_eval.push(model, &traj, ki + 1);
            }
        }
    }
    if traj.final_state().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "scheme `{}` produced a non-finite state at M = {m}",
            scheme.id()
        )));
    }
    Ok(traj)
}

/// Ratio between the Brownian grid and the scheme grid.
pub(crate) fn coupling_factor(
    model: &SdeModel,
    m: usize,
    brownian: &BrownianPath,
) -> Result<usize> {
    if brownian.dim() != model.dim() {
        return Err(Error::Mismatch(format!(
            "Brownian dimension {} but the model noise dimension is {}",
            brownian.dim(),
            model.dim()
        )));
    }
    if (brownian.tau() - model.tau()).abs() > 1e-12 * model.tau() {
        return Err(Error::Mismatch(format!(
            "Brownian grid unit {} differs from tau = {}",
            brownian.tau(),
            model.tau()
        )));
    }
    if m == 0 || !brownian.m().is_multiple_of(m) {
        return Err(Error::Config(format!(
            "M = {m} does not divide the Brownian grid M = {}",
            brownian.m()
        )));
    }
    Ok(brownian.m() / m)
}

/// Default cap on stored reference values (`nodes * state dimension`).
pub const REFERENCE_VALUE_CAP: usize = 1 << 26;

/// Fine-grid reference path at `m_ref` steps per `tau`.
pub fn reference_solution(
    model: &SdeModel,
    t: f64,
    brownian: &BrownianPath,
    m_ref: usize,
) -> Result<Trajectory> {
    reference_solution_capped(model, t, brownian, m_ref, REFERENCE_VALUE_CAP)
}

pub fn reference_solution_capped(
    model: &SdeModel,
    t: f64,
    brownian: &BrownianPath,
    m_ref: usize,
    cap: usize,
) -> Result<Trajectory> {
    let n = grid_steps(model.tau(), m_ref, t)?;
    let size = (n + model.history_steps(m_ref) + 1).saturating_mul(model.state_dim());
    if size > cap {
        return Err(Error::SizeGuard(format!(
            "reference path needs {size} values, above the cap {cap}"
        )));
    }
    simulate(model, SchemeKind::reference_for(model), m_ref, t, brownian)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_model, overrides};
    use std::collections::BTreeMap;

    #[test]
    fn deterministic_euler_step() {
        let m = builtin_model("ou-linear", &overrides(&[("a", "-1"), ("x0", "1")])).unwrap();
        let traj = initial_trajectory(&m, 2, 1);
        let next = truncated_em_step(&m, &traj, 0, &[0.0]).unwrap();
        assert_eq!(next, vec![0.5]);
    }

    #[test]
    fn point_delay_step_hand_value() {
        let m = builtin_model(
            "holder-point-delay",
            &overrides(&[("a", "-1"), ("c", "1"), ("alpha", "0.5"), ("x0", "1")]),
        )
        .unwrap();
        let traj = initial_trajectory(&m, 4, 1);
        let next = em_interpolated_step(&m, &traj, 0, &[0.0]).unwrap();
        assert_eq!(next, vec![1.0 + (-1.0 + 1.0) * 0.25]);
    }

    #[test]
    fn hamiltonian_exponential_flow() {
        let m = builtin_model(
            "hamiltonian-holder",
            &overrides(&[("c", "0"), ("x0", "1"), ("y0", "0")]),
        )
        .unwrap();
        let traj = initial_trajectory(&m, 8, 1);
        // with y = 0 the velocity drift -a1 x enters only through e^δ - 1 - δ
        let next = hamiltonian_step(&m, &traj, 0, &[0.0], false).unwrap();
        let d = 0.125f64;
        let expect = d.exp() - 3.0 * (d.exp_m1() - d);
        assert!((next[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn routes_agree_on_every_catalog_model() {
        for spec in crate::models::manifest() {
            let model = builtin_model(spec.name, &BTreeMap::new()).unwrap();
            let schemes: &[SchemeKind] = match model.memory() {
                Memory::Finite => &[SchemeKind::Interp, SchemeKind::Trunc],
                Memory::Hamiltonian => &[SchemeKind::Hamiltonian, SchemeKind::HamiltonianEuler],
                _ => &[SchemeKind::Trunc],
            };
            let bm = BrownianPath::generate(5, 1, model.dim(), model.tau(), 16, 32);
            for &s in schemes {
                let a = simulate_with(&model, s, 8, 2.0, &bm, Route::Incremental).unwrap();
                let b = simulate_with(&model, s, 8, 2.0, &bm, Route::General).unwrap();
                for (x, y) in a.values().iter().zip(b.values()) {
                    assert!(
                        (x - y).abs() <= 1e-12 * (1.0 + y.abs()),
                        "{} {s}: {x} vs {y}",
                        spec.name
                    );
                }
            }
        }
    }

    #[test]
    fn reference_size_guard() {
        let m = builtin_model("zero-drift", &BTreeMap::new()).unwrap();
        let bm = BrownianPath::generate(1, 0, 1, 1.0, 64, 64);
        assert!(matches!(
            reference_solution_capped(&m, 1.0, &bm, 64, 10),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn non_grid_horizon_is_rejected() {
        let m = builtin_model("zero-drift", &BTreeMap::new()).unwrap();
        let bm = BrownianPath::generate(1, 0, 1, 1.0, 8, 16);
        assert!(simulate(&m, SchemeKind::Trunc, 8, 0.3, &bm).is_err());
        assert!(simulate(&m, SchemeKind::Trunc, 8, 3.0, &bm).is_err());
        assert!(simulate(&m, SchemeKind::Hamiltonian, 8, 1.0, &bm).is_err());
    }
}
