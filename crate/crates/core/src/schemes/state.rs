//! Incremental evaluation of the path functional along a stored trajectory.
//!
//! Every functional in the catalog is a sliding-window maximum, a sliding
//! sum or a fixed-lag lookup, so `Z` at node `k` is available in amortized
//! O(1) once node `k` has been pushed. The results agree with
//! [`evaluate_functional_drift`](crate::models::evaluate_functional_drift)
//! on the node segment up to summation order.

use std::collections::VecDeque;

use crate::models::{holder_pow, Functional, Memory, Rho, SdeModel};
use crate::segment::{euclid, snap_index, Trajectory};

/// Lookup of `xi(-lag)` on the grid: exact node or linear interpolation
/// between lags `i` and `i + 1` with weights `(a, b)`.
#[derive(Debug, Clone, Copy)]
struct LagRead {
    i: i64,
    a: f64,
    b: f64,
    exact: bool,
}

impl LagRead {
    fn new(lag: f64, delta: f64, steps: usize) -> Self {
        let theta = -lag;
        let u = lag / delta;
        if let Some(i) = snap_index(u) {
            return Self {
                i: i.clamp(0, steps as i64),
                a: 1.0,
                b: 0.0,
                exact: true,
            };
        }
        let i = (u.floor() as usize).min(steps - 1);
        Self {
            i: i as i64,
            a: (theta + (1 + i) as f64 * delta) / delta,
            b: (theta + i as f64 * delta) / delta,
            exact: false,
        }
    }

    #[inline]
    fn read(&self, traj: &Trajectory, k: i64, out: &mut [f64]) {
        let newer = traj.node(k - self.i);
        if self.exact {
            out.copy_from_slice(newer);
        } else {
            let older = traj.node(k - self.i - 1);
            for ((o, vn), vo) in out.iter_mut().zip(newer).zip(older) {
                *o = self.a * vn - self.b * vo;
            }
        }
    }
}

/// Monotone deque for the maximum of `e^{-r (k - j) delta} |x_j|` over the
/// last `window` intervals.
#[derive(Debug, Clone)]
pub(crate) struct SlidingMax {
    window: i64,
    decay: f64,
    delta: f64,
    entries: VecDeque<(i64, f64)>,
}

impl SlidingMax {
    pub(crate) fn new(window: usize, rate: f64, delta: f64) -> Self {
        Self {
            window: window as i64,
            decay: rate,
            delta,
            entries: VecDeque::with_capacity(window + 1),
        }
    }

    #[inline]
    fn weight(&self, lag: i64) -> f64 {
        if self.decay == 0.0 {
            1.0
        } else {
            (-self.decay * lag as f64 * self.delta).exp()
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, k: i64, mag: f64) {
        while let Some(&(j, v)) = self.entries.back() {
            if self.weight(k - j) * v <= mag {
                self.entries.pop_back();
            } else {
                break;
            }
        }
        self.entries.push_back((k, mag));
        while let Some(&(j, _)) = self.entries.front() {
            if j < k - self.window {
                self.entries.pop_front();
            } else {
                break;
            }
        }
    }

    #[inline]
    pub(crate) fn max(&self, k: i64) -> f64 {
        self.entries
            .front()
            .map(|&(j, v)| self.weight(k - j) * v)
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Zero,
    Point {
        coeff: f64,
        alpha: f64,
        lag: LagRead,
    },
    Max {
        coeff: f64,
        alpha: f64,
        max: SlidingMax,
    },
    Pair {
        coeff: f64,
        alpha: f64,
        x: SlidingMax,
        y: SlidingMax,
    },
    AveragedPoint {
        lag: LagRead,
    },
    AveragedUniform {
        window: i64,
        scale: f64,
        first: i64,
        sum: Vec<f64>,
        z: Vec<f64>,
    },
}

/// Functional drift `Z` along one trajectory, node by node.
#[derive(Debug, Clone)]
pub(crate) struct ZEvaluator {
    d: usize,
    unit: f64,
    kind: Kind,
    scratch: Vec<f64>,
    out: Vec<f64>,
    oldest: i64,
}

impl ZEvaluator {
    /// Prepares the evaluator for `traj` and pushes every node from the oldest
    /// stored one up to `upto`.
    pub(crate) fn new(model: &SdeModel, traj: &Trajectory, upto: i64) -> Self {
        let d = model.dim();
        let delta = traj.delta();
        let window = model.history_steps(traj.m());
        let kind = match (model.functional(), model.memory()) {
            (f, _) if f.is_zero() => Kind::Zero,
            (Functional::PointDelay { coeff, alpha, lag }, _) => Kind::Point {
                coeff,
                alpha,
                lag: LagRead::new(lag, delta, window),
            },
            (Functional::SupNorm { coeff, alpha }, _) => Kind::Max {
                coeff,
                alpha,
                max: SlidingMax::new(window, 0.0, delta),
            },
            (Functional::WeightedSup { coeff, alpha }, Memory::Infinite { rate, .. }) => {
                Kind::Max {
                    coeff,
                    alpha,
                    max: SlidingMax::new(window, rate, delta),
                }
            }
            (Functional::PairSup { coeff, alpha }, _) => Kind::Pair {
                coeff,
                alpha,
                x: SlidingMax::new(window, 0.0, delta),
                y: SlidingMax::new(window, 0.0, delta),
            },
            (
                Functional::Averaged { .. },
                Memory::Distributed {
                    rho: Rho::Point { lag },
                },
            ) => Kind::AveragedPoint {
                lag: LagRead::new(lag, delta, window),
            },
            (Functional::Averaged { .. }, Memory::Distributed { rho: Rho::Uniform }) => {
                let first = -(traj.history_steps() as i64);
                Kind::AveragedUniform {
                    window: window as i64,
                    scale: delta / (window as f64 * delta),
                    first,
                    sum: vec![0.0; d],
                    z: vec![0.0; (traj.history_steps() + traj.n_steps() + 1) * d],
                }
            }
            (f, mem) => {
                unreachable!("functional {f:?} with memory {mem:?} passed model validation")
            }
        };
        let mut ev = Self {
            d,
            unit: 1.0 / (d as f64).sqrt(),
            kind,
            scratch: vec![0.0; d],
            out: vec![0.0; d],
            oldest: -(traj.history_steps() as i64),
        };
        for k in ev.oldest..=upto {
            ev.push(model, traj, k);
        }
        ev
    }

    /// Registers node `k`; nodes must be pushed in increasing order.
    #[inline]
    pub(crate) fn push(&mut self, model: &SdeModel, traj: &Trajectory, k: i64) {
        let d = self.d;
        match &mut self.kind {
            Kind::Zero | Kind::Point { .. } | Kind::AveragedPoint { .. } => {}
            Kind::Max { max, .. } => max.push(k, euclid(traj.node(k))),
            Kind::Pair { x, y, .. } => {
                let v = traj.node(k);
                x.push(k, euclid(&v[..d]));
                y.push(k, euclid(&v[d..]));
            }
            Kind::AveragedUniform {
                window,
                first,
                sum,
                z,
                ..
            } => {
                let slot = ((k - *first) as usize) * d;
                model.pointwise_z(traj.node(k), &mut z[slot..slot + d]);
                for (s, zi) in sum.iter_mut().zip(&z[slot..slot + d]) {
                    *s += zi;
                }
                let gone = k - *window - 1;
                if gone >= *first {
                    let g = ((gone - *first) as usize) * d;
                    for (s, zi) in sum.iter_mut().zip(&z[g..g + d]) {
                        *s -= zi;
                    }
                }
            }
        }
    }

    /// `Z` of the node segment at `k`; node `k` must have been pushed.
    #[inline]
    pub(crate) fn value(&mut self, model: &SdeModel, traj: &Trajectory, k: i64) -> &[f64] {
        let d = self.d;
        let unit = self.unit;
        match &self.kind {
            Kind::Zero => self.out.iter_mut().for_each(|o| *o = 0.0),
            Kind::Point { coeff, alpha, lag } => {
                lag.read(traj, k, &mut self.scratch);
                for (o, x) in self.out.iter_mut().zip(&self.scratch) {
                    *o = coeff * holder_pow(x.abs(), *alpha);
                }
            }
            Kind::Max { coeff, alpha, max } => {
                let v = coeff * holder_pow(max.max(k), *alpha) * unit;
                self.out.iter_mut().for_each(|o| *o = v);
            }
            Kind::Pair { coeff, alpha, x, y } => {
                let v =
                    coeff * (holder_pow(x.max(k), *alpha) + holder_pow(y.max(k), *alpha)) * unit;
                self.out.iter_mut().for_each(|o| *o = v);
            }
            Kind::AveragedPoint { lag } => {
                lag.read(traj, k, &mut self.scratch);
                model.pointwise_z(&self.scratch, &mut self.out);
            }
            Kind::AveragedUniform {
                window,
                scale,
                first,
                sum,
                z,
            } => {
                let newest = ((k - *first) as usize) * d;
                let oldest = ((k - *window - *first) as usize) * d;
                for i in 0..d {
                    let trap = sum[i] - 0.5 * (z[newest + i] + z[oldest + i]);
                    self.out[i] = scale * trap;
                }
            }
        }
        &self.out
    }
}
