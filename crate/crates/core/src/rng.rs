//! Brownian increment tables with counter-based per-path substreams.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Random stream of one path: ChaCha8 keyed by `seed`, stream `path_index`.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Brownian increments on the grid `delta = tau / m`, `n_steps` rows of `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    tau: f64,
    m: usize,
    dim: usize,
    n_steps: usize,
    increments: Vec<f64>,
}

impl BrownianPath {
    /// Draws the table for `(seed, path_index)`. The same key always yields
    /// the same table.
    pub fn generate(
        seed: u64,
        path_index: u64,
        dim: usize,
        tau: f64,
        m: usize,
        n_steps: usize,
    ) -> Self {
        let mut rng = path_rng(seed, path_index);
        let scale = (tau / m as f64).sqrt();
        let increments = (0..n_steps * dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            tau,
            m,
            dim,
            n_steps,
            increments,
        }
    }

    pub fn from_increments(tau: f64, m: usize, dim: usize, increments: Vec<f64>) -> Result<Self> {
        if dim == 0 || m == 0 || !increments.len().is_multiple_of(dim) {
            return Err(Error::Config(format!(
                "{} increments do not form rows of dimension {dim}",
                increments.len()
            )));
        }
        Ok(Self {
            tau,
            m,
            dim,
            n_steps: increments.len() / dim,
            increments,
        })
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

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.delta()
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W((k+1) delta) - W(k delta)`.
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    /// Writes the sum of fine increments `factor*k .. factor*(k+1)` into `out`,
    /// accumulated left to right.
    #[inline]
    pub fn coarse_increment(&self, factor: usize, k: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in k * factor..(k + 1) * factor {
            for (o, v) in out.iter_mut().zip(self.increment(j)) {
                *o += v;
            }
        }
    }

    /// Adds the fine increments of coarse step `k` to the running value `w`,
    /// one at a time, so `w` equals `W` at fine nodes bit for bit on every level.
    #[inline]
    pub fn advance(&self, factor: usize, k: usize, w: &mut [f64]) {
        for j in k * factor..(k + 1) * factor {
            for (a, v) in w.iter_mut().zip(self.increment(j)) {
                *a += v;
            }
        }
    }

    /// Increments on the grid with spacing `factor * delta`.
    pub fn aggregate(&self, factor: usize) -> Result<BrownianPath> {
        if factor == 0 || !self.m.is_multiple_of(factor) {
            return Err(Error::Config(format!(
                "aggregation factor {factor} does not divide m = {}",
                self.m
            )));
        }
        let n = self.n_steps / factor;
        let mut increments = vec![0.0; n * self.dim];
        for k in 0..n {
            self.coarse_increment(factor, k, &mut increments[k * self.dim..(k + 1) * self.dim]);
        }
        Ok(BrownianPath {
            tau: self.tau,
            m: self.m / factor,
            dim: self.dim,
            n_steps: n,
            increments,
        })
    }

    /// `W(k delta)`, summed left to right from `W(0) = 0`.
    pub fn value(&self, k: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.dim];
        for j in 0..k {
            for (a, v) in w.iter_mut().zip(self.increment(j)) {
                *a += v;
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_table() {
        let a = BrownianPath::generate(7, 3, 2, 1.0, 16, 32);
        let b = BrownianPath::generate(7, 3, 2, 1.0, 16, 32);
        let c = BrownianPath::generate(7, 4, 2, 1.0, 16, 32);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn aggregation_sums_children() {
        let fine = BrownianPath::generate(1, 0, 1, 1.0, 8, 8);
        let coarse = fine.aggregate(4).unwrap();
        assert_eq!(coarse.n_steps(), 2);
        let s: f64 = fine.increments()[4..8].iter().fold(0.0, |a, b| a + b);
        assert_eq!(coarse.increment(1)[0], s);
        assert!(fine.aggregate(3).is_err());
    }

    #[test]
    fn increments_have_the_grid_variance() {
        let p = BrownianPath::generate(11, 0, 1, 1.0, 4, 40_000);
        let var = p.increments().iter().map(|x| x * x).sum::<f64>() / 40_000.0;
        assert!((var - 0.25).abs() < 0.01, "{var}");
    }
}
