//! Time-horizon smallness conditions of the convergence theorems and the
//! exponential-moment thresholds for the Girsanov weights.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Functional, LyapunovConstants, Memory, SdeModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theorem {
    /// Interpolated EM, finite memory, rate `delta^kappa` for `kappa < alpha/2`.
    Th1,
    /// Truncated EM, finite memory, rate `delta^(alpha/2)`.
    Th2,
    /// Truncated EM, infinite memory.
    Th3,
    /// Hamiltonian truncated scheme.
    Th4,
    /// Gradient drift with distributed delay, rate `delta^alpha`.
    Th5,
}

impl Theorem {
    pub fn id(self) -> &'static str {
        match self {
            Theorem::Th1 => "th1",
            Theorem::Th2 => "th2",
            Theorem::Th3 => "th3",
            Theorem::Th4 => "th4",
            Theorem::Th5 => "th5",
        }
    }

    /// Weak order the theorem guarantees for Hölder exponent `alpha`.
    /// For `th1` this is the supremum of admissible orders.
    pub fn rate(self, alpha: f64) -> f64 {
        match self {
            Theorem::Th5 => alpha,
            _ => alpha / 2.0,
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "th1" => Ok(Theorem::Th1),
            "th2" => Ok(Theorem::Th2),
            "th3" => Ok(Theorem::Th3),
            "th4" => Ok(Theorem::Th4),
            "th5" => Ok(Theorem::Th5),
            other => Err(Error::Config(format!("unknown theorem `{other}`"))),
        }
    }
}

/// Largest horizon up to which the smallness condition holds continuously
/// from `T = 0`. `t_max = None` means the condition never fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleHorizon {
    pub t_max: Option<f64>,
    pub theorem: Theorem,
    pub formula_id: String,
}

impl AdmissibleHorizon {
    pub fn is_unbounded(&self) -> bool {
        self.t_max.is_none()
    }

    pub fn covers(&self, t: f64) -> bool {
        self.t_max.is_none_or(|tm| t < tm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeTag {
    InsideTheorem,
    OutsideTheorem,
}

/// Whether a run at horizon `t` satisfies the theorem's smallness condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub theorem: Theorem,
    pub t: f64,
    pub horizon: Option<AdmissibleHorizon>,
    pub note: Option<String>,
}

fn need(v: Option<f64>, name: &str, theorem: Theorem) -> Result<f64> {
    v.ok_or_else(|| {
        Error::Config(format!(
            "constant `{name}` required by {theorem} is not defined for this model"
        ))
    })
}

fn inverse_hs(model: &SdeModel) -> Result<f64> {
    model
        .sigma()
        .inverse_hs()
        .ok_or_else(|| Error::Config("diffusion matrix is singular".into()))
}

/// `margin(T) > 0` iff the smallness condition holds at `T`.
struct Condition {
    formula_id: &'static str,
    margin: Box<dyn Fn(f64) -> f64>,
}

fn holder_indicator(alpha: f64) -> bool {
    alpha == 1.0
}

fn condition(model: &SdeModel, theorem: Theorem) -> Result<Condition> {
    let c = model.constants();
    let hs2 = model.sigma().hs().powi(2);
    let ihs2 = inverse_hs(model)?.powi(2);
    let alpha = need(c.alpha, "alpha", theorem)?;
    match theorem {
        Theorem::Th1 | Theorem::Th2 | Theorem::Th3 => {
            let l1 = need(c.l1, "L1", theorem)?;
            let (l2, formula_id) = if theorem == Theorem::Th3 {
                (need(c.l4, "L4", theorem)?, "eq19-weighted")
            } else {
                (need(c.l2, "L2", theorem)?, "eq19")
            };
            let beta = need(c.beta, "beta", theorem)?;
            let bracket = if holder_indicator(alpha) {
                4.0 * l1 * l1 + l2 * l2
            } else {
                l1 * l1
            };
            let lhs = 2.0 * hs2 * ihs2 * bracket;
            Ok(Condition {
                formula_id,
                margin: Box::new(move |t| (-(1.0 + beta * t)).exp() / (t * t) - lhs),
            })
        }
        Theorem::Th4 => {
            let k1 = need(c.k1, "K1", theorem)?;
            let k2 = need(c.k2, "K2", theorem)?;
            let lyap = LyapunovConstants::new(
                need(c.lyap_alpha, "lyap_alpha", theorem)?,
                need(c.lyap_beta, "lyap_beta", theorem)?,
                need(c.lyap_gamma, "lyap_gamma", theorem)?,
            )?;
            let lambda = need(c.lyap_lambda, "lyap_lambda", theorem)?;
            let bracket = if holder_indicator(alpha) {
                4.0 * k1 * k1 + k2 * k2
            } else {
                2.0 * k1 * k1
            };
            let lhs = 2.0 * lyap.kappa3 * hs2 * ihs2 * bracket;
            let k2l = lyap.kappa2;
            Ok(Condition {
                formula_id: "th4-lambda-exponent",
                margin: Box::new(move |t| k2l * (lambda * k2l * t - 1.0).exp() - lhs * t * t),
            })
        }
        Theorem::Th5 => {
            let kappa = need(c.kappa, "kappa", theorem)?;
            let beta = need(c.beta, "beta", theorem)?;
            let d = model.dim() as f64;
            Ok(Condition {
                formula_id: "e9",
                margin: Box::new(move |t| {
                    let a = kappa / (2.0 * d.max(2.0) * ihs2 * t * t);
                    let b = (-(1.0 + beta * t)).exp() / (32.0 * hs2 * ihs2 * t * t);
                    let e = kappa / ((d / 2.0).max(1.0) * t);
                    a.min(b).min(e) - 1.0
                }),
            })
        }
    }
}

const SCAN_LO: f64 = 1e-6;
const SCAN_HI: f64 = 1e4;
const SCAN_POINTS: usize = 4000;

/// Horizon below which the theorem's smallness condition holds for every
/// `T` in `(0, t_max)`.
///
/// The conditions need not be monotone in `T` (a negative `beta` or the
/// exponential factor of `th4` can make them hold again for large `T`), so
/// the first failure on a geometric scan of `[1e-6, 1e4]` is located and
/// refined by bisection.
pub fn admissible_horizon(model: &SdeModel, theorem: Theorem) -> Result<AdmissibleHorizon> {
    check_theorem_fits(model, theorem)?;
    let cond = condition(model, theorem)?;
    let ok = |t: f64| (cond.margin)(t) > 0.0;
    if !ok(SCAN_LO) {
        return Err(Error::Infeasible(format!(
            "{theorem} smallness condition fails already at T = {SCAN_LO:e}"
        )));
    }
    let ratio = (SCAN_HI / SCAN_LO).powf(1.0 / (SCAN_POINTS - 1) as f64);
    let mut prev = SCAN_LO;
    for i in 1..SCAN_POINTS {
        let t = SCAN_LO * ratio.powi(i as i32);
        if !ok(t) {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if ok(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(AdmissibleHorizon {
                t_max: Some(lo),
                theorem,
                formula_id: cond.formula_id.to_string(),
            });
        }
        prev = t;
    }
    Ok(AdmissibleHorizon {
        t_max: None,
        theorem,
        formula_id: cond.formula_id.to_string(),
    })
}

fn check_theorem_fits(model: &SdeModel, theorem: Theorem) -> Result<()> {
    let fits = match theorem {
        Theorem::Th1 | Theorem::Th2 => matches!(model.memory(), Memory::Finite),
        Theorem::Th3 => matches!(model.memory(), Memory::Infinite { .. }),
        Theorem::Th4 => model.is_hamiltonian(),
        Theorem::Th5 => matches!(model.memory(), Memory::Distributed { .. }),
    };
    if fits {
        Ok(())
    } else {
        Err(Error::Mismatch(format!(
            "{theorem} does not cover memory {:?}",
            model.memory()
        )))
    }
}

/// Regime tag of a run at horizon `t`: inside iff the smallness condition
/// holds at `t` itself.
pub fn regime(model: &SdeModel, theorem: Theorem, t: f64) -> Regime {
    let horizon = admissible_horizon(model, theorem);
    let holds = condition(model, theorem)
        .map(|c| check_theorem_fits(model, theorem).is_ok() && (c.margin)(t) > 0.0)
        .unwrap_or(false);
    let note = match &horizon {
        Err(e) => Some(e.to_string()),
        Ok(h) if holds && !h.covers(t) => Some(format!(
            "condition holds at T = {t} but fails somewhere in (0, T); first failure at {:.6}",
            h.t_max.unwrap_or(f64::INFINITY)
        )),
        Ok(h) if h.formula_id == "th4-lambda-exponent" => {
            Some("th4 condition evaluated with the dissipativity lambda in the exponent".into())
        }
        _ => None,
    };
    Regime {
        tag: if holds {
            RegimeTag::InsideTheorem
        } else {
            RegimeTag::OutsideTheorem
        },
        theorem,
        t,
        horizon: horizon.ok(),
        note,
    }
}

/// One exponential-moment threshold. `lambda = None` means no
/// restriction (the denominator of the bound vanishes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaThreshold {
    pub id: String,
    pub quantity: String,
    pub lambda: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

/// Thresholds `lambda*` below which the theory asserts finite exponential
/// moments at horizon `t`.
pub fn lambda_thresholds(model: &SdeModel, t: f64) -> Vec<LambdaThreshold> {
    let c = model.constants();
    let hs2 = model.sigma().hs().powi(2);
    let ihs2 = model
        .sigma()
        .inverse_hs()
        .map(|v| v * v)
        .unwrap_or(f64::NAN);
    let alpha = c.alpha.unwrap_or(1.0);
    let full = holder_indicator(alpha);
    let mut out = Vec::new();
    let mut push = |id: &str, quantity: &str, lambda: Option<f64>| {
        out.push(LambdaThreshold {
            id: id.into(),
            quantity: quantity.into(),
            lambda,
        })
    };
    match model.memory() {
        Memory::Hamiltonian => {
            if let (Some(la), Some(lb), Some(lg), Some(lambda), Some(k1), Some(k2)) = (
                c.lyap_alpha,
                c.lyap_beta,
                c.lyap_gamma,
                c.lyap_lambda,
                c.k1,
                c.k2,
            ) {
                if let Ok(lyap) = LyapunovConstants::new(la, lb, lg) {
                    let top = lyap.kappa2 * (lambda * lyap.kappa2 * t - 1.0).exp();
                    let bracket_h = if full {
                        4.0 * k1 * k1 + k2 * k2
                    } else {
                        2.0 * k1 * k1
                    };
                    push(
                        "d11",
                        "int ‖U_t‖^2 + ‖V_t‖^2 dt",
                        ratio(top, lyap.kappa3 * hs2 * t * t),
                    );
                    push(
                        "r1",
                        "int |sigma^-1 Z(U_t, V_t)|^2 dt",
                        ratio(
                            top,
                            2.0 * lyap.kappa3
                                * hs2
                                * ihs2
                                * if full { k2 * k2 } else { 0.0 }
                                * t
                                * t,
                        ),
                    );
                    push(
                        "r7",
                        "int |h(t)|^2 dt",
                        ratio(top, 4.0 * lyap.kappa3 * hs2 * ihs2 * bracket_h * t * t),
                    );
                }
            }
        }
        Memory::Distributed { .. } => {
            if let (Some(kappa), Some(beta), Some(l0)) = (c.kappa, c.beta, c.l0) {
                let d = model.dim() as f64;
                push(
                    "e4",
                    "int |int Z(Y(t + theta)) rho(dtheta)|^2 dt",
                    Some(kappa / ((d / 2.0).max(1.0) * t)),
                );
                let a = kappa / (2.0 * d.max(2.0) * ihs2 * t * t);
                let b = ratio(
                    (-(1.0 + beta * t)).exp(),
                    32.0 * hs2 * ihs2 * l0 * l0 * t * t,
                );
                push("e6", "int |h4(t)|^2 dt", Some(b.map_or(a, |b| a.min(b))));
            }
            if let Some(beta) = c.beta {
                push(
                    "eq11",
                    "int ‖Y_t‖_∞^2 dt",
                    ratio((-(1.0 + beta * t)).exp(), 2.0 * hs2 * t * t),
                );
            }
        }
        _ => {
            if let Some(beta) = c.beta {
                let e = (-(1.0 + beta * t)).exp();
                push("eq11", "int ‖Y_t‖_∞^2 dt", ratio(e, 2.0 * hs2 * t * t));
                let l2 = if matches!(model.memory(), Memory::Infinite { .. }) {
                    c.l4
                } else {
                    c.l2
                };
                if let (Some(l1), Some(l2)) = (c.l1, l2) {
                    let z = if full { l2 * l2 } else { 0.0 };
                    let z = if matches!(model.functional(), Functional::Zero) {
                        0.0
                    } else {
                        z
                    };
                    push(
                        "eq12",
                        "int |sigma^-1 Z(Y_t)|^2 dt",
                        ratio(e, 2.0 * hs2 * ihs2 * z * t * t),
                    );
                    let bracket = if full {
                        4.0 * l1 * l1 + l2 * l2
                    } else {
                        l1 * l1
                    };
                    push(
                        "w12",
                        "int |h1(t)|^2 dt",
                        ratio(e, 4.0 * hs2 * ihs2 * bracket * t * t),
                    );
                }
            }
        }
    }
    out
}
