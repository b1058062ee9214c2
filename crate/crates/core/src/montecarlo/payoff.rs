use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounded test function applied to the state at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payoff {
    /// `sin(x[coord])`
    Sin {
        coord: usize,
    },
    /// `1{x[coord] > threshold}`
    Indicator {
        coord: usize,
        threshold: f64,
    },
    /// `x[coord]` clamped to `[lo, hi]`
    Clamp {
        coord: usize,
        lo: f64,
        hi: f64,
    },
    Constant {
        value: f64,
    },
}

impl Payoff {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Payoff::Sin { coord } => x[coord].sin(),
            Payoff::Indicator { coord, threshold } => {
                if x[coord] > threshold {
                    1.0
                } else {
                    0.0
                }
            }
            Payoff::Clamp { coord, lo, hi } => x[coord].clamp(lo, hi),
            Payoff::Constant { value } => value,
        }
    }

    /// `sup |f|`.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            Payoff::Sin { .. } | Payoff::Indicator { .. } => 1.0,
            Payoff::Clamp { lo, hi, .. } => lo.abs().max(hi.abs()),
            Payoff::Constant { value } => value.abs(),
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, Payoff::Indicator { .. })
    }

    pub fn id(&self) -> String {
        self.to_string()
    }

    pub(crate) fn check(&self, state_dim: usize) -> Result<()> {
        let coord = match *self {
            Payoff::Sin { coord }
            | Payoff::Indicator { coord, .. }
            | Payoff::Clamp { coord, .. } => coord,
            Payoff::Constant { .. } => 0,
        };
        if coord >= state_dim {
            return Err(Error::Config(format!(
                "payoff coordinate {coord} outside the state dimension {state_dim}"
            )));
        }
        if let Payoff::Clamp { lo, hi, .. } = *self {
            if !(lo <= hi) {
                return Err(Error::Config(format!(
                    "clamp bounds [{lo}, {hi}] are empty"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Payoff::Sin { coord } => write!(f, "sin:{coord}"),
            Payoff::Indicator { coord, threshold } => write!(f, "indicator:{coord}:{threshold}"),
            Payoff::Clamp { coord, lo, hi } => write!(f, "clamp:{coord}:{lo}:{hi}"),
            Payoff::Constant { value } => write!(f, "const:{value}"),
        }
    }
}

impl FromStr for Payoff {
    type Err = Error;

    /// `sin[:coord]`, `indicator[:coord[:threshold]]`,
    /// `clamp[:coord[:lo:hi]]`, `const:value`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || {
            Error::Config(format!(
                "cannot parse payoff `{s}` (expected sin[:coord], indicator[:coord[:threshold]], clamp[:coord[:lo:hi]] or const:value)"
            ))
        };
        let num = |i: usize, default: f64| -> Result<f64> {
            parts
                .get(i)
                .map_or(Ok(default), |p| p.parse().map_err(|_| bad()))
        };
        let coord = |i: usize| -> Result<usize> {
            parts.get(i).map_or(Ok(0), |p| p.parse().map_err(|_| bad()))
        };
        match parts[0] {
            "sin" if parts.len() <= 2 => Ok(Payoff::Sin { coord: coord(1)? }),
            "indicator" if parts.len() <= 3 => Ok(Payoff::Indicator {
                coord: coord(1)?,
                threshold: num(2, 0.0)?,
            }),
            "clamp" if parts.len() == 4 || parts.len() <= 2 => Ok(Payoff::Clamp {
                coord: coord(1)?,
                lo: num(2, -1.0)?,
                hi: num(3, 1.0)?,
            }),
            "const" if parts.len() == 2 => Ok(Payoff::Constant {
                value: num(1, 0.0)?,
            }),
            _ => Err(bad()),
        }
    }
}
