//! Seeded path sampling, payoff expectations, weak-error tables with common
//! random numbers and convergence-order regression.

mod payoff;
mod regression;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use payoff::Payoff;
pub use regression::fit_order;

use crate::error::{Error, Result};
use crate::models::{lambda_thresholds, regime, LambdaThreshold, Regime, SdeModel};
use crate::rng::BrownianPath;
use crate::schemes::{grid_steps, simulate, SchemeKind};

/// Version of the JSON and CSV layouts of [`WeakErrorReport`].
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Fraction of flagged paths above which an estimate is marked unreliable.
pub const UNRELIABLE_FLAG_RATE: f64 = 0.01;

/// Worker scheduling. Per-path results are gathered in path order and
/// reduced sequentially, so both modes give bit-identical aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    /// Rayon pool with the given worker count (`None`: rayon's default).
    Parallel { threads: Option<usize> },
    #[default]
    Sequential,
}

impl Execution {
    pub fn parallel() -> Self {
        Execution::Parallel { threads: None }
    }
}

/// Evaluates `per_path` for every index, in path order.
pub(crate) fn map_paths<T, F>(n_paths: usize, execution: Execution, per_path: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    match execution {
        Execution::Sequential => (0..n_paths as u64).map(&per_path).collect(),
        Execution::Parallel { threads } => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads {
                builder = builder.num_threads(t.max(1));
            }
            let pool = builder
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
            pool.install(|| {
                (0..n_paths as u64)
                    .into_par_iter()
                    .map(&per_path)
                    .collect::<Vec<_>>()
            })
            .into_iter()
            .collect()
        }
    }
}

/// Mean and standard error of a sample, two-pass with a corrected mean and
/// in input order. A constant sample gets its value back exactly.
pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let rough = xs.iter().sum::<f64>() / n as f64;
    let mean = rough + xs.iter().map(|x| x - rough).sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt(), var)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Paths entering the estimate (requested minus flagged).
    pub n_paths: usize,
    pub flagged: usize,
    pub unreliable: bool,
    pub payoff_id: String,
    pub model_id: String,
    pub scheme_id: String,
    pub t: f64,
    pub m: usize,
}

impl MonteCarloEstimate {
    pub(crate) fn from_samples(
        samples: &[Option<f64>],
        payoff: &Payoff,
        model: &SdeModel,
        scheme_id: &str,
        t: f64,
        m: usize,
    ) -> Self {
        let kept: Vec<f64> = samples.iter().flatten().copied().collect();
        let flagged = samples.len() - kept.len();
        let (mean, stderr, _) = mean_stderr(&kept);
        Self {
            mean,
            stderr,
            n_paths: kept.len(),
            flagged,
            unreliable: flagged as f64 > UNRELIABLE_FLAG_RATE * samples.len() as f64,
            payoff_id: payoff.id(),
            model_id: model.name().to_string(),
            scheme_id: scheme_id.to_string(),
            t,
            m,
        }
    }
}

/// Result of one path, with non-finite states flagged instead of failing
/// the whole run.
pub(crate) fn flag_non_finite<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NonFinite(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `E f(X^{(delta)}(T))` over `n_paths` independent paths keyed by `(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_expectation(
    model: &SdeModel,
    scheme: SchemeKind,
    m: usize,
    t: f64,
    payoff: &Payoff,
    n_paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<MonteCarloEstimate> {
    scheme.check(model)?;
    payoff.check(model.state_dim())?;
    if n_paths == 0 {
        return Err(Error::Config("need at least one path".into()));
    }
    let n = grid_steps(model.tau(), m, t)?;
    let samples = map_paths(n_paths, execution, |i| {
        let bm = BrownianPath::generate(seed, i, model.dim(), model.tau(), m, n);
        let r = simulate(model, scheme, m, t, &bm).map(|traj| payoff.eval(traj.final_state()));
        flag_non_finite(r.and_then(finite))
    })?;
    Ok(MonteCarloEstimate::from_samples(
        &samples,
        payoff,
        model,
        scheme.id(),
        t,
        m,
    ))
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("payoff".into()))
    }
}

/// Settings of a weak-error experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Reference steps per `tau`; `None` selects `16 * max(levels)`.
    pub m_ref: Option<usize>,
    pub execution: Execution,
    /// Also run the reference at `2 * m_ref` on the same noise and report
    /// the difference as the reference bias.
    pub reference_bias: bool,
}

impl WeakErrorConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            m_ref: None,
            execution: Execution::default(),
            reference_bias: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorRow {
    pub m: usize,
    pub delta: f64,
    /// `|E f(X_ref(T)) - E f(X_M(T))|` from the coupled difference.
    pub error: f64,
    /// Signed mean of `f(X_ref(T)) - f(X_M(T))`.
    pub difference: f64,
    /// Standard error of the coupled difference.
    pub stderr: f64,
    /// Standard error the difference would have with independent noise.
    pub stderr_independent: f64,
    pub mean: f64,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBias {
    pub m_fine: usize,
    /// Mean of `f(X_{2 m_ref}(T)) - f(X_{m_ref}(T))`.
    pub difference: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorReport {
    pub schema_version: u32,
    pub model: String,
    pub scheme: SchemeKind,
    pub payoff: String,
    pub t: f64,
    pub tau: f64,
    pub n_paths: usize,
    pub flagged: usize,
    pub unreliable: bool,
    pub seed: u64,
    pub reference_m: usize,
    pub reference_mean: f64,
    pub reference_stderr: f64,
    pub rows: Vec<WeakErrorRow>,
    pub fitted_order: Option<f64>,
    pub order_stderr: Option<f64>,
    /// Order asserted by the matching theorem.
    pub theory_order: f64,
    pub regime: Regime,
    pub lambda_thresholds: Vec<LambdaThreshold>,
    pub reference_bias: Option<ReferenceBias>,
    pub notes: Vec<String>,
}

impl WeakErrorReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV with columns `M,delta,error,stderr,resolved`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("M,delta,error,stderr,resolved\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{}",
                r.m, r.delta, r.error, r.stderr, r.resolved
            );
        }
        s
    }

    /// Per-level sample summary: `M,mean,stderr,difference,stderr_independent`.
    pub fn paths_summary_csv(&self) -> String {
        let mut s = String::from("M,mean,difference,stderr,stderr_independent\n");
        let _ = writeln!(s, "{},{:e},0,0,0", self.reference_m, self.reference_mean);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e}",
                r.m, r.mean, r.difference, r.stderr, r.stderr_independent
            );
        }
        s
    }
}

fn check_levels(levels: &[usize], m_ref: usize) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Config("no levels given".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) || levels[0] == 0 {
        return Err(Error::Config(format!(
            "levels must be positive and strictly increasing, got {levels:?}"
        )));
    }
    for &l in levels {
        if !m_ref.is_multiple_of(l) || !(m_ref / l).is_power_of_two() || m_ref == l {
            return Err(Error::Config(format!(
                "level M = {l} is not a dyadic coarsening of the reference M = {m_ref}"
            )));
        }
    }
    Ok(())
}

struct PathSample {
    reference: f64,
    levels: Vec<f64>,
    finer: Option<f64>,
}

/// Weak errors of the scheme at each level against a fine reference driven
/// by the same Brownian path.
pub fn weak_error_table(
    model: &SdeModel,
    scheme: SchemeKind,
    levels: &[usize],
    t: f64,
    payoff: &Payoff,
    config: &WeakErrorConfig,
) -> Result<WeakErrorReport> {
    let theorem = scheme.theorem(model)?;
    payoff.check(model.state_dim())?;
    let max_level = *levels
        .iter()
        .max()
        .ok_or_else(|| Error::Config("no levels given".into()))?;
    let m_ref = config.m_ref.unwrap_or(16 * max_level);
    check_levels(levels, m_ref)?;
    if config.n_paths < 2 {
        return Err(Error::Config("need at least two paths".into()));
    }
    for &l in levels {
        grid_steps(model.tau(), l, t)?;
    }
    let m_fine = if config.reference_bias {
        2 * m_ref
    } else {
        m_ref
    };
    let n_fine = grid_steps(model.tau(), m_fine, t)?;
    let reference_scheme = SchemeKind::reference_for(model);

    let samples = map_paths(config.n_paths, config.execution, |i| {
        let bm = BrownianPath::generate(config.seed, i, model.dim(), model.tau(), m_fine, n_fine);
        let run = || -> Result<PathSample> {
            let reference = finite(
                payoff.eval(simulate(model, reference_scheme, m_ref, t, &bm)?.final_state()),
            )?;
            let mut out = Vec::with_capacity(levels.len());
            for &l in levels {
                out.push(finite(
                    payoff.eval(simulate(model, scheme, l, t, &bm)?.final_state()),
                )?);
            }
            let finer = if config.reference_bias {
                Some(finite(payoff.eval(
                    simulate(model, reference_scheme, m_fine, t, &bm)?.final_state(),
                ))?)
            } else {
                None
            };
            Ok(PathSample {
                reference,
                levels: out,
                finer,
            })
        };
        flag_non_finite(run())
    })?;

    let kept: Vec<&PathSample> = samples.iter().flatten().collect();
    let flagged = samples.len() - kept.len();
    if kept.len() < 2 {
        return Err(Error::NonFinite(format!(
            "{flagged} of {} paths produced non-finite values",
            samples.len()
        )));
    }
    let n = kept.len() as f64;
    let refs: Vec<f64> = kept.iter().map(|s| s.reference).collect();
    let (reference_mean, reference_stderr, reference_var) = mean_stderr(&refs);

    let mut rows = Vec::with_capacity(levels.len());
    for (j, &l) in levels.iter().enumerate() {
        let vals: Vec<f64> = kept.iter().map(|s| s.levels[j]).collect();
        let diffs: Vec<f64> = kept.iter().map(|s| s.reference - s.levels[j]).collect();
        let (mean, _, var) = mean_stderr(&vals);
        let (difference, stderr, _) = mean_stderr(&diffs);
        let error = difference.abs();
        rows.push(WeakErrorRow {
            m: l,
            delta: model.tau() / l as f64,
            error,
            difference,
            stderr,
            stderr_independent: ((reference_var + var) / n).sqrt(),
            mean,
            resolved: error > 3.0 * stderr,
        });
    }

    let reference_bias = if config.reference_bias {
        let d: Vec<f64> = kept
            .iter()
            .map(|s| s.finer.unwrap_or(f64::NAN) - s.reference)
            .collect();
        let (difference, stderr, _) = mean_stderr(&d);
        Some(ReferenceBias {
            m_fine,
            difference,
            stderr,
        })
    } else {
        None
    };

    let mut notes = Vec::new();
    let resolved: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.resolved)
        .map(|r| (r.delta, r.error, r.stderr))
        .collect();
    let (fitted_order, order_stderr) = if rows.iter().all(|r| r.error == 0.0 && r.stderr == 0.0) {
        notes.push("scheme exact: every coupled difference is identically zero".to_string());
        (None, None)
    } else if resolved.len() < 3 {
        notes.push(format!(
            "only {} of {} levels resolved (error > 3 stderr); no order fitted",
            resolved.len(),
            rows.len()
        ));
        (None, None)
    } else {
        match fit_order(&resolved) {
            Ok((o, se)) => (Some(o), Some(se)),
            Err(e) => {
                notes.push(format!("order fit failed: {e}"));
                (None, None)
            }
        }
    };
    let regime = regime(model, theorem, t);
    if let Some(b) = &reference_bias {
        if let Some(coarsest) = rows.first() {
            if b.difference.abs() > 0.1 * coarsest.error {
                notes.push(format!(
                    "reference bias {:.3e} exceeds 10% of the coarsest error {:.3e}",
                    b.difference, coarsest.error
                ));
            }
        }
    }
    if let Some(note) = &regime.note {
        notes.push(note.clone());
    }
    let unreliable = flagged as f64 > UNRELIABLE_FLAG_RATE * samples.len() as f64;
    let alpha = model
        .functional()
        .alpha()
        .or(model.constants().alpha)
        .unwrap_or(1.0);

    Ok(WeakErrorReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model: model.name().to_string(),
        scheme,
        payoff: payoff.id(),
        t,
        tau: model.tau(),
        n_paths: kept.len(),
        flagged,
        unreliable,
        seed: config.seed,
        reference_m: m_ref,
        reference_mean,
        reference_stderr,
        rows,
        fitted_order,
        order_stderr,
        theory_order: theorem.rate(alpha),
        regime,
        lambda_thresholds: lambda_thresholds(model, t),
        reference_bias,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_model, overrides};
    use std::collections::BTreeMap;

    #[test]
    fn constant_payoff_has_zero_stderr() {
        let m = builtin_model("ou-linear", &BTreeMap::new()).unwrap();
        let e = estimate_expectation(
            &m,
            SchemeKind::Trunc,
            8,
            1.0,
            &Payoff::Constant { value: 2.5 },
            200,
            1,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.n_paths, 200);
    }

    #[test]
    fn zero_drift_is_exact() {
        let m = builtin_model("zero-drift", &BTreeMap::new()).unwrap();
        let r = weak_error_table(
            &m,
            SchemeKind::Trunc,
            &[2, 4, 8],
            1.0,
            &Payoff::Sin { coord: 0 },
            &WeakErrorConfig::new(50, 3),
        )
        .unwrap();
        assert!(r.rows.iter().all(|r| r.error == 0.0));
        assert_eq!(r.fitted_order, None);
        assert!(r.notes.iter().any(|n| n.contains("scheme exact")));
    }

    #[test]
    fn non_dyadic_levels_are_rejected() {
        let m = builtin_model("ou-linear", &overrides(&[])).unwrap();
        let cfg = WeakErrorConfig {
            m_ref: Some(96),
            ..WeakErrorConfig::new(10, 1)
        };
        let r = weak_error_table(
            &m,
            SchemeKind::Trunc,
            &[8, 12],
            1.0,
            &Payoff::Sin { coord: 0 },
            &cfg,
        );
        assert!(matches!(r, Err(Error::Config(_))));
        let r = weak_error_table(
            &m,
            SchemeKind::Trunc,
            &[8, 12],
            1.0,
            &Payoff::Sin { coord: 0 },
            &WeakErrorConfig::new(10, 1),
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn execution_modes_agree_bitwise() {
        let m = builtin_model("holder-supnorm", &BTreeMap::new()).unwrap();
        let p = Payoff::Sin { coord: 0 };
        let a = estimate_expectation(
            &m,
            SchemeKind::Trunc,
            8,
            1.0,
            &p,
            300,
            9,
            Execution::Sequential,
        )
        .unwrap();
        let b = estimate_expectation(
            &m,
            SchemeKind::Trunc,
            8,
            1.0,
            &p,
            300,
            9,
            Execution::Parallel { threads: Some(3) },
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
