use std::collections::BTreeMap;

use serde::Serialize;

use super::{
    Constants, Functional, InitialSegment, LocalDrift, LyapunovConstants, Memory, ParamValue, Rho,
    SdeModel, Sigma, Theorem,
};
use crate::error::{Error, Result};

/// Admissible values of one catalog parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ParamKind {
    Real {
        default: f64,
        min: Option<f64>,
        max: Option<f64>,
        /// Whether `min` itself is excluded.
        min_open: bool,
    },
    Int {
        default: usize,
        min: usize,
        max: usize,
    },
    Choice {
        default: &'static str,
        options: Vec<&'static str>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    #[serde(flatten)]
    pub kind: ParamKind,
    pub description: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub theorems: Vec<Theorem>,
    pub params: Vec<ParamSpec>,
}

fn real(name: &'static str, default: f64, description: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Real {
            default,
            min: None,
            max: None,
            min_open: false,
        },
        description,
    }
}

fn positive(name: &'static str, default: f64, description: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Real {
            default,
            min: Some(0.0),
            max: None,
            min_open: true,
        },
        description,
    }
}

fn nonnegative(name: &'static str, default: f64, description: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Real {
            default,
            min: Some(0.0),
            max: None,
            min_open: false,
        },
        description,
    }
}

fn exponent(default: f64) -> ParamSpec {
    ParamSpec {
        name: "alpha",
        kind: ParamKind::Real {
            default,
            min: Some(0.0),
            max: Some(1.0),
            min_open: true,
        },
        description: "Hölder exponent of the path functional, in (0, 1]",
    }
}

fn common() -> Vec<ParamSpec> {
    vec![
        ParamSpec {
            name: "d",
            kind: ParamKind::Int {
                default: 1,
                min: 1,
                max: 64,
            },
            description: "state dimension (noise dimension for Hamiltonian models)",
        },
        positive("sigma", 1.0, "diffusion matrix is sigma * I"),
        positive("tau", 1.0, "memory length"),
    ]
}

fn with_common(extra: Vec<ParamSpec>) -> Vec<ParamSpec> {
    let mut p = common();
    p.extend(extra);
    p
}

/// Machine-readable description of every catalog model.
pub fn manifest() -> Vec<ModelSpec> {
    vec![
        ModelSpec {
            name: "zero-drift",
            description: "b = 0, Z = 0: scaled Brownian motion",
            theorems: vec![Theorem::Th1, Theorem::Th2],
            params: with_common(vec![real("x0", 0.0, "constant initial segment value")]),
        },
        ModelSpec {
            name: "ou-linear",
            description: "b(x) = a x, Z = 0: Ornstein-Uhlenbeck process",
            theorems: vec![Theorem::Th1, Theorem::Th2],
            params: with_common(vec![
                real("a", -1.0, "linear drift coefficient"),
                real("x0", 1.0, "constant initial segment value"),
            ]),
        },
        ModelSpec {
            name: "holder-point-delay",
            description: "b(x) = a x, Z(xi) = c |xi(-lag)|^alpha componentwise",
            theorems: vec![Theorem::Th1, Theorem::Th2],
            params: with_common(vec![
                real("a", 0.0, "linear drift coefficient"),
                nonnegative("c", 1.0, "functional coefficient"),
                exponent(0.5),
                positive("lag", 1.0, "delay, in (0, tau]"),
                real("x0", 1.0, "constant initial segment value"),
            ]),
        },
        ModelSpec {
            name: "holder-supnorm",
            description: "b(x) = a x, Z(xi) = c ‖xi‖_∞^alpha along the unit diagonal",
            theorems: vec![Theorem::Th1, Theorem::Th2],
            params: with_common(vec![
                real("a", 0.0, "linear drift coefficient"),
                nonnegative("c", 0.3, "functional coefficient"),
                exponent(1.0),
                real("x0", 0.0, "constant initial segment value"),
            ]),
        },
        ModelSpec {
            name: "infinite-exp",
            description: "b(x) = a x, Z(xi) = c ‖xi‖_r^alpha on the exponentially weighted space",
            theorems: vec![Theorem::Th3],
            params: with_common(vec![
                real("a", -0.5, "linear drift coefficient"),
                nonnegative("c", 0.3, "functional coefficient"),
                exponent(1.0),
                positive("r", 1.0, "exponential weight rate"),
                positive("hist_bound", 10.0, "magnitude bound used to size the stored history"),
                positive("hist_tol", 1e-12, "neglected tail weight of the stored history"),
                real("x0", 0.5, "constant initial segment value"),
            ]),
        },
        ModelSpec {
            name: "hamiltonian-holder",
            description: "dX = (X + Y)dt, dY = {-a1 X - a2 Y + Z}dt + sigma dW, Z = c(‖xi‖^alpha + ‖eta‖^alpha) along the diagonal",
            theorems: vec![Theorem::Th4],
            params: with_common(vec![
                positive("a1", 3.0, "position damping"),
                positive("a2", 2.0, "velocity damping"),
                nonnegative("c", 1.0, "functional coefficient"),
                exponent(1.0),
                positive("lyap_alpha", 3.0, "Lyapunov weight on |x|^2"),
                positive("lyap_beta", 1.0, "Lyapunov weight on |y|^2"),
                real("lyap_gamma", 1.2, "Lyapunov cross weight, in (-alpha*beta, alpha*beta)"),
                real("x0", 0.5, "constant initial position segment"),
                real("y0", 0.0, "constant initial velocity segment"),
            ]),
        },
        ModelSpec {
            name: "gradient-gaussian",
            description: "Z0(x) = -(sigma sigma^T) grad V, V(x) = cv |x|^2, distributed delay of z(x) = cz |x|^alpha",
            theorems: vec![Theorem::Th5],
            params: with_common(vec![
                positive("cv", 1.0, "potential coefficient"),
                nonnegative("cz", 0.3, "functional coefficient"),
                exponent(1.0),
                ParamSpec {
                    name: "rho",
                    kind: ParamKind::Choice {
                        default: "uniform",
                        options: vec!["uniform", "point"],
                    },
                    description: "delay measure: uniform on [-tau, 0] or a point mass at -lag",
                },
                nonnegative("lag", 0.0, "point-mass delay, in [0, tau]"),
                nonnegative(
                    "kappa",
                    0.0,
                    "integrability level; 0 selects the default (cv / (2 cz^2) for alpha = 1, 1 otherwise)",
                ),
                real("x0", 0.5, "constant initial segment value"),
            ]),
        },
    ]
}

/// Builds an override map from string pairs.
pub fn overrides(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

struct Resolved {
    model: &'static str,
    values: BTreeMap<String, ParamValue>,
}

impl Resolved {
    fn real(&self, name: &str) -> f64 {
        match self.values.get(name) {
            Some(ParamValue::Real(v)) => *v,
            other => panic!(
                "catalog parameter {name} of {} resolved to {other:?}",
                self.model
            ),
        }
    }

    fn int(&self, name: &str) -> usize {
        match self.values.get(name) {
            Some(ParamValue::Int(v)) => *v,
            other => panic!(
                "catalog parameter {name} of {} resolved to {other:?}",
                self.model
            ),
        }
    }

    fn choice(&self, name: &str) -> &str {
        match self.values.get(name) {
            Some(ParamValue::Choice(v)) => v,
            other => panic!(
                "catalog parameter {name} of {} resolved to {other:?}",
                self.model
            ),
        }
    }
}

fn resolve(spec: &ModelSpec, given: &BTreeMap<String, String>) -> Result<Resolved> {
    for key in given.keys() {
        if !spec.params.iter().any(|p| p.name == key) {
            let known: Vec<&str> = spec.params.iter().map(|p| p.name).collect();
            return Err(Error::Config(format!(
                "unknown parameter `{key}` for model `{}` (known: {})",
                spec.name,
                known.join(", ")
            )));
        }
    }
    let mut values = BTreeMap::new();
    for p in &spec.params {
        let raw = given.get(p.name).map(|s| s.trim());
        let bad = |why: &str| {
            Error::Config(format!(
                "parameter `{}` of model `{}`: {why}",
                p.name, spec.name
            ))
        };
        let value = match &p.kind {
            ParamKind::Real {
                default,
                min,
                max,
                min_open,
            } => {
                let v = match raw {
                    None => *default,
                    Some(s) => s
                        .parse::<f64>()
                        .map_err(|_| bad(&format!("`{s}` is not a number")))?,
                };
                if !v.is_finite() {
                    return Err(bad("must be finite"));
                }
                if let Some(lo) = min {
                    if v < *lo || (*min_open && v == *lo) {
                        let op = if *min_open { ">" } else { ">=" };
                        return Err(bad(&format!("{v} violates {op} {lo}")));
                    }
                }
                if let Some(hi) = max {
                    if v > *hi {
                        return Err(bad(&format!("{v} violates <= {hi}")));
                    }
                }
                ParamValue::Real(v)
            }
            ParamKind::Int { default, min, max } => {
                let v = match raw {
                    None => *default,
                    Some(s) => s
                        .parse::<usize>()
                        .map_err(|_| bad(&format!("`{s}` is not a nonnegative integer")))?,
                };
                if v < *min || v > *max {
                    return Err(bad(&format!("{v} outside [{min}, {max}]")));
                }
                ParamValue::Int(v)
            }
            ParamKind::Choice { default, options } => {
                let v = raw.unwrap_or(default);
                if !options.contains(&v) {
                    return Err(bad(&format!("`{v}` not one of {}", options.join(", "))));
                }
                ParamValue::Choice(v.to_string())
            }
        };
        values.insert(p.name.to_string(), value);
    }
    Ok(Resolved {
        model: spec.name,
        values,
    })
}

/// Instantiates a catalog model. `params` holds string overrides keyed by
/// parameter name; everything else takes its manifest default.
pub fn builtin_model(name: &str, params: &BTreeMap<String, String>) -> Result<SdeModel> {
    let spec = manifest()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownModel(name.to_string()))?;
    let p = resolve(&spec, params)?;
    let d = p.int("d");
    let s = p.real("sigma");
    let tau = p.real("tau");
    let sigma = Sigma::scaled_identity(d, s);
    let df = d as f64;
    let constant = |v: f64| InitialSegment::Constant(vec![v; d]);

    let model = match name {
        "zero-drift" => SdeModel::new(
            name,
            d,
            tau,
            LocalDrift::Zero,
            Functional::Zero,
            sigma,
            Memory::Finite,
            Constants {
                l1: Some(0.0),
                l2: Some(0.0),
                beta: Some(0.0),
                c: Some(0.0),
                alpha: Some(1.0),
                l3: Some(0.0),
                ..Constants::default()
            },
            constant(p.real("x0")),
        )?,
        "ou-linear" => {
            let a = p.real("a");
            SdeModel::new(
                name,
                d,
                tau,
                LocalDrift::Linear { a },
                Functional::Zero,
                sigma,
                Memory::Finite,
                Constants {
                    l1: Some(a.abs()),
                    l2: Some(0.0),
                    beta: Some(2.0 * a),
                    c: Some(0.0),
                    alpha: Some(1.0),
                    l3: Some(0.0),
                    ..Constants::default()
                },
                constant(p.real("x0")),
            )?
        }
        "holder-point-delay" => {
            let (a, c, alpha, lag) = (p.real("a"), p.real("c"), p.real("alpha"), p.real("lag"));
            if lag > tau {
                return Err(Error::Config(format!(
                    "parameter `lag` of model `{name}`: {lag} exceeds tau = {tau}"
                )));
            }
            SdeModel::new(
                name,
                d,
                tau,
                LocalDrift::Linear { a },
                Functional::PointDelay {
                    coeff: c,
                    alpha,
                    lag,
                },
                sigma,
                Memory::Finite,
                Constants {
                    l1: Some(a.abs()),
                    l2: Some(c * df.powf((1.0 - alpha) / 2.0)),
                    beta: Some(2.0 * a),
                    c: Some(0.0),
                    alpha: Some(alpha),
                    l3: Some(0.0),
                    ..Constants::default()
                },
                constant(p.real("x0")),
            )?
        }
        "holder-supnorm" => {
            let (a, c, alpha) = (p.real("a"), p.real("c"), p.real("alpha"));
            SdeModel::new(
                name,
                d,
                tau,
                LocalDrift::Linear { a },
                Functional::SupNorm { coeff: c, alpha },
                sigma,
                Memory::Finite,
                Constants {
                    l1: Some(a.abs()),
                    l2: Some(c),
                    beta: Some(2.0 * a),
                    c: Some(0.0),
                    alpha: Some(alpha),
                    l3: Some(0.0),
                    ..Constants::default()
                },
                constant(p.real("x0")),
            )?
        }
        "infinite-exp" => {
            let (a, c, alpha, r) = (p.real("a"), p.real("c"), p.real("alpha"), p.real("r"));
            let (bound, tol) = (p.real("hist_bound"), p.real("hist_tol"));
            if !(tol < bound) {
                return Err(Error::Config(format!(
                    "model `{name}`: hist_tol = {tol} must be below hist_bound = {bound}"
                )));
            }
            let raw = (bound / tol).ln() / r;
            let history = (raw / tau).ceil().max(1.0) * tau;
            SdeModel::new(
                name,
                d,
                tau,
                LocalDrift::Linear { a },
                Functional::WeightedSup { coeff: c, alpha },
                sigma,
                Memory::Infinite { rate: r, history },
                Constants {
                    l1: Some(a.abs()),
                    l4: Some(c),
                    beta: Some(2.0 * a),
                    c: Some(0.0),
                    alpha: Some(alpha),
                    l3: Some(0.0),
                    r: Some(r),
                    ..Constants::default()
                },
                constant(p.real("x0")),
            )?
        }
        "hamiltonian-holder" => {
            let (a1, a2, c, alpha) = (p.real("a1"), p.real("a2"), p.real("c"), p.real("alpha"));
            let (la, lb, lg) = (
                p.real("lyap_alpha"),
                p.real("lyap_beta"),
                p.real("lyap_gamma"),
            );
            LyapunovConstants::new(la, lb, lg)?;
            let lambda = hamiltonian_dissipativity(a1, a2, la, lb, lg);
            if !(lambda > 0.0) {
                return Err(Error::Config(format!(
                    "model `{name}`: the Lyapunov weights (alpha={la}, beta={lb}, gamma={lg}) give no dissipativity for a1={a1}, a2={a2} (lambda = {lambda:.4})"
                )));
            }
            let mut init = vec![p.real("x0"); d];
            init.extend(std::iter::repeat_n(p.real("y0"), d));
            SdeModel::new(
                name,
                d,
                tau,
                LocalDrift::Damped { a1, a2 },
                Functional::PairSup { coeff: c, alpha },
                sigma,
                Memory::Hamiltonian,
                Constants {
                    k1: Some(a1.max(a2)),
                    k2: Some(c),
                    alpha: Some(alpha),
                    lyap_alpha: Some(la),
                    lyap_beta: Some(lb),
                    lyap_gamma: Some(lg),
                    lyap_lambda: Some(lambda),
                    c: Some(0.0),
                    l3: Some(0.0),
                    ..Constants::default()
                },
                InitialSegment::Constant(init),
            )?
        }
        "gradient-gaussian" => {
            let (cv, cz, alpha) = (p.real("cv"), p.real("cz"), p.real("alpha"));
            let rho = match p.choice("rho") {
                "point" => {
                    let lag = p.real("lag");
                    if lag > tau {
                        return Err(Error::Config(format!(
                            "parameter `lag` of model `{name}`: {lag} exceeds tau = {tau}"
                        )));
                    }
                    Rho::Point { lag }
                }
                _ => Rho::Uniform,
            };
            let kappa = match p.real("kappa") {
                k if k > 0.0 => k,
                _ if alpha == 1.0 && cz > 0.0 => cv / (2.0 * cz * cz),
                _ => 1.0,
            };
            let (gram_lo, gram_hi) = sigma.gram_eigen_range();
            SdeModel::new(
                name,
                d,
                tau,
                LocalDrift::Gradient { c: cv },
                Functional::Averaged { coeff: cz, alpha },
                sigma,
                Memory::Distributed { rho },
                Constants {
                    l0: Some(2.0 * cv * gram_hi),
                    l1: Some(2.0 * cv * gram_hi),
                    l2: Some(cz * df.powf((1.0 - alpha) / 2.0)),
                    beta: Some(-4.0 * cv * gram_lo),
                    c: Some(0.0),
                    alpha: Some(alpha),
                    l3: Some(0.0),
                    kappa: Some(kappa),
                    m: Some(1.0),
                    ..Constants::default()
                },
                constant(p.real("x0")),
            )?
        }
        _ => return Err(Error::UnknownModel(name.to_string())),
    };
    Ok(model.with_params(p.values))
}

/// Largest `lambda` in `<ax + gy, x + y> + <by + gx, -a1 x - a2 y> <= -lambda(|x|^2 + |y|^2)`.
pub(crate) fn hamiltonian_dissipativity(a1: f64, a2: f64, la: f64, lb: f64, lg: f64) -> f64 {
    let q11 = la - lg * a1;
    let q22 = lg - lb * a2;
    let q12 = 0.5 * (la + lg - lb * a1 - lg * a2);
    let mean = 0.5 * (q11 + q22);
    let spread = (0.25 * (q11 - q22).powi(2) + q12 * q12).sqrt();
    -(mean + spread)
}
