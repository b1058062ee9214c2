use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use pathsde::diagnostics::{
    displacement_scaling, exponential_moment_sweep, lyapunov_bounds_check, lyapunov_grid_check,
    mu0_integrability, DiagnosticReport, DisplacementConfig, QuadratureConfig, Verdict,
};
use pathsde::girsanov::{importance_sampled_expectation, GirsanovConfig, NovikovQuantity, Variant};
use pathsde::models::{lambda_thresholds, manifest, regime, Regime, RegimeTag, SdeModel};
use pathsde::montecarlo::{
    estimate_expectation, weak_error_table, WeakErrorConfig, REPORT_SCHEMA_VERSION,
};
use pathsde::schemes::SchemeKind;

use crate::config::ExperimentConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_FAILED: u8 = 2;
pub const EXIT_INCONCLUSIVE: u8 = 3;

/// Result of one command: the JSON document printed to stdout, extra files
/// for `--out`, and the process exit code.
pub struct Outcome {
    pub report: Value,
    pub files: Vec<(&'static str, String)>,
    pub exit: u8,
}

fn envelope(command: &str, cfg: &ExperimentConfig, body: Value) -> Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": command,
        "config": cfg,
        "result": body,
    })
}

fn verdict_exit(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => EXIT_OK,
        Verdict::Fail => EXIT_FAILED,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Refuses runs outside the theorem's horizon unless `--force-t` is set.
fn guard_regime(cfg: &ExperimentConfig, reg: &Regime) -> Result<()> {
    if reg.tag == RegimeTag::OutsideTheorem && !cfg.force_t {
        let limit = reg
            .horizon
            .as_ref()
            .and_then(|h| h.t_max)
            .map(|t| format!("admissible horizon ends at T = {t:.6}"))
            .or_else(|| reg.note.clone())
            .unwrap_or_else(|| "smallness condition fails".into());
        bail!(
            "--t: T = {} lies outside the regime of {} ({limit}); pass --force-t to run anyway",
            cfg.t,
            reg.theorem
        );
    }
    Ok(())
}

fn regime_for(model: &SdeModel, scheme: SchemeKind, t: f64) -> Result<Regime> {
    Ok(regime(
        model,
        scheme
            .theorem(model)
            .map_err(|e| anyhow!("--scheme: {e}"))?,
        t,
    ))
}

pub fn catalog() -> Outcome {
    Outcome {
        report: json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "schema_version": REPORT_SCHEMA_VERSION,
            "models": manifest(),
        }),
        files: Vec::new(),
        exit: EXIT_OK,
    }
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let scheme = cfg.scheme(&model)?;
    let payoff = cfg.payoff(&model)?;
    let reg = regime_for(&model, scheme, cfg.t)?;
    let est = estimate_expectation(
        &model,
        scheme,
        cfg.m,
        cfg.t,
        &payoff,
        cfg.paths,
        cfg.seed,
        cfg.execution(),
    )?;
    let exit = if est.unreliable {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    let body = json!({
        "estimate": est,
        "regime": reg,
        "lambda_thresholds": lambda_thresholds(&model, cfg.t),
    });
    Ok(Outcome {
        report: envelope("simulate", cfg, body),
        files: Vec::new(),
        exit,
    })
}

pub fn converge(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let scheme = cfg.scheme(&model)?;
    let payoff = cfg.payoff(&model)?;
    guard_regime(cfg, &regime_for(&model, scheme, cfg.t)?)?;
    let wcfg = WeakErrorConfig {
        n_paths: cfg.paths,
        seed: cfg.seed,
        m_ref: cfg.m_ref,
        execution: cfg.execution(),
        reference_bias: cfg.reference_bias,
    };
    let report = weak_error_table(&model, scheme, &cfg.levels, cfg.t, &payoff, &wcfg)?;
    let mut exit = if report.unreliable {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    let mut order_check = Value::Null;
    if let Some([lo, hi]) = cfg.expect_order {
        let verdict = match report.fitted_order {
            None => Verdict::Inconclusive,
            Some(o) if o >= lo && o <= hi => Verdict::Pass,
            Some(_) => Verdict::Fail,
        };
        order_check =
            json!({ "band": [lo, hi], "fitted_order": report.fitted_order, "verdict": verdict });
        if verdict != Verdict::Pass {
            exit = exit.max(verdict_exit(verdict));
        }
    }
    let files = vec![
        ("errors.csv", report.to_csv()),
        ("paths-summary.csv", report.paths_summary_csv()),
    ];
    let mut body = serde_json::to_value(&report)?;
    body["order_check"] = order_check;
    Ok(Outcome {
        report: envelope("converge", cfg, body),
        files,
        exit,
    })
}

pub fn girsanov_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let payoff = cfg.payoff(&model)?;
    let variant: Variant = cfg.variant.parse().map_err(|e| anyhow!("--variant: {e}"))?;
    variant
        .check(&model)
        .map_err(|e| anyhow!("--variant: {e}"))?;
    let gcfg = GirsanovConfig {
        execution: cfg.execution(),
        ..GirsanovConfig::default()
    };
    let target = match variant {
        Variant::R1 => SchemeKind::reference_for(&model),
        Variant::R2 { h, .. } => h.scheme(&model),
    };
    let reg = regime_for(&model, target, cfg.t)?;
    guard_regime(cfg, &reg)?;
    let is = importance_sampled_expectation(
        &model, &payoff, cfg.t, cfg.m, cfg.paths, cfg.seed, variant, &gcfg,
    )?;
    let direct = estimate_expectation(
        &model,
        target,
        cfg.m,
        cfg.t,
        &payoff,
        cfg.paths,
        cfg.seed.wrapping_add(1),
        cfg.execution(),
    )?;
    let combined = (is.estimate.stderr.powi(2) + direct.stderr.powi(2)).sqrt();
    let diff = is.estimate.mean - direct.mean;
    let z = if combined > 0.0 {
        diff / combined
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let mean_ok = z.abs() <= 3.0;
    let weight_ok = (is.weight_mean - 1.0).abs() <= 3.0 * is.weight_stderr.max(f64::EPSILON);
    let cap_ok = is.cap_rate < 1e-3;
    let verdict = if is.estimate.unreliable || direct.unreliable {
        Verdict::Inconclusive
    } else if mean_ok && weight_ok && cap_ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let body = json!({
        "importance_sampled": is,
        "direct": direct,
        "difference": diff,
        "combined_stderr": combined,
        "z": z,
        "checks": { "means_agree": mean_ok, "weight_mean_one": weight_ok, "cap_rate_small": cap_ok },
        "verdict": verdict,
        "regime": reg,
        "lambda_thresholds": lambda_thresholds(&model, cfg.t),
    });
    Ok(Outcome {
        report: envelope("girsanov-check", cfg, body),
        files: Vec::new(),
        exit: verdict_exit(verdict),
    })
}

fn default_lambdas(model: &SdeModel, quantity: &NovikovQuantity, t: f64) -> Vec<f64> {
    let id = quantity.threshold_id(model);
    let star = lambda_thresholds(model, t)
        .into_iter()
        .find(|th| th.id == id)
        .and_then(|th| th.lambda)
        .filter(|l| l.is_finite() && *l > 0.0);
    match star {
        Some(l) => vec![0.0, 0.25 * l, 0.5 * l, 0.9 * l],
        None => vec![0.0, 0.05, 0.1, 0.2],
    }
}

pub fn diagnose(cfg: &ExperimentConfig) -> Result<Outcome> {
    let check = cfg.check.as_deref().ok_or_else(|| {
        anyhow!("--check is required (displacement, lyapunov, lyapunov-grid, mu0 or moments)")
    })?;
    let [la, lb, lg] = cfg.lyapunov;
    let report: DiagnosticReport = match check {
        "lyapunov" => lyapunov_bounds_check(la, lb, lg, cfg.samples, cfg.seed)?,
        "lyapunov-grid" => lyapunov_grid_check(20, 4.0, (cfg.samples / 1000).max(10), cfg.seed)?,
        "displacement" => {
            let model = cfg.model()?;
            let dcfg = DisplacementConfig {
                execution: cfg.execution(),
                ..DisplacementConfig::default()
            };
            displacement_scaling(
                &model,
                cfg.p,
                &cfg.levels,
                cfg.t,
                cfg.paths,
                cfg.seed,
                &dcfg,
            )?
        }
        "mu0" => {
            let model = cfg.model()?;
            let kappa = cfg
                .kappa
                .ok_or_else(|| anyhow!("--kappa is required for --check mu0"))?;
            mu0_integrability(&model, kappa, &QuadratureConfig::default())?.to_report(&model)
        }
        "moments" => {
            let model = cfg.model()?;
            let quantity: NovikovQuantity = cfg
                .quantity
                .parse()
                .map_err(|e| anyhow!("--quantity: {e}"))?;
            let lambdas = cfg
                .lambdas
                .clone()
                .unwrap_or_else(|| default_lambdas(&model, &quantity, cfg.t));
            exponential_moment_sweep(
                &model,
                quantity,
                cfg.t,
                cfg.m,
                &lambdas,
                cfg.paths,
                cfg.seed,
                cfg.execution(),
            )?
        }
        other => bail!("--check: unknown check `{other}`"),
    };
    let exit = verdict_exit(report.verdict);
    let mut body = serde_json::to_value(&report)?;
    if check != "lyapunov" && check != "lyapunov-grid" {
        let model = cfg.model()?;
        body["lambda_thresholds"] = serde_json::to_value(lambda_thresholds(&model, cfg.t))?;
    }
    Ok(Outcome {
        report: envelope("diagnose", cfg, body),
        files: Vec::new(),
        exit,
    })
}

/// Writes `report.json` and any extra files into `dir`.
pub fn write_outputs(dir: &Path, outcome: &Outcome) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let json = serde_json::to_string_pretty(&outcome.report)?;
    std::fs::write(dir.join("report.json"), json + "\n")
        .with_context(|| format!("cannot write {}", dir.join("report.json").display()))?;
    for (name, content) in &outcome.files {
        std::fs::write(dir.join(name), content)
            .with_context(|| format!("cannot write {}", dir.join(name).display()))?;
    }
    Ok(())
}
