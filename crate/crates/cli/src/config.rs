//! Experiment configuration: a flat TOML file whose keys mirror the
//! command-line flags, with flags taking precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use pathsde::models::{builtin_model, SdeModel};
use pathsde::montecarlo::{Execution, Payoff};
use pathsde::schemes::SchemeKind;

/// Flags shared by every experiment subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat TOML file with the same keys as the long flags
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Catalog model name (see `pathsde catalog`)
    #[arg(long)]
    pub model: Option<String>,
    /// interp, trunc, hamiltonian or hamiltonian-euler
    #[arg(long)]
    pub scheme: Option<String>,
    /// Hölder exponent of the path functional
    #[arg(long)]
    pub alpha: Option<f64>,
    /// State dimension
    #[arg(long)]
    pub d: Option<usize>,
    /// Diffusion scale
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Memory length
    #[arg(long)]
    pub tau: Option<f64>,
    /// Further model parameter, repeatable
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Stepsize levels M (steps per tau), comma separated
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// Time horizon
    #[arg(long)]
    pub t: Option<f64>,
    /// Steps per tau for single-level commands
    #[arg(long)]
    pub m: Option<usize>,
    /// Monte Carlo paths per estimate
    #[arg(long)]
    pub paths: Option<usize>,
    /// Master seed; path i uses stream i of this seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// sin[:coord], indicator[:coord[:threshold]], clamp[:coord[:lo:hi]] or const:value
    #[arg(long)]
    pub payoff: Option<String>,
    /// Reference steps per tau (default 16 * max level)
    #[arg(long)]
    pub m_ref: Option<usize>,
    /// Directory for report.json and the CSV files
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Run every path on the calling thread
    #[arg(long)]
    pub strict_sequential: bool,
    /// Worker threads for parallel runs
    #[arg(long, env = "PATHSDE_THREADS")]
    pub threads: Option<usize>,
    /// Run even when T lies outside the theorem's admissible horizon
    #[arg(long)]
    pub force_t: bool,
    /// Also run the reference at 2 * M_ref to estimate its bias
    #[arg(long)]
    pub reference_bias: bool,
    /// Fail (exit 2) unless the fitted order lies in [lo, hi]
    #[arg(long, value_delimiter = ',', value_name = "LO,HI")]
    pub expect_order: Option<Vec<f64>>,
    /// Weight variant: r1, r2:h<k> or r2:h<k>:<factor>
    #[arg(long)]
    pub variant: Option<String>,
    /// displacement, lyapunov, lyapunov-grid, mu0 or moments
    #[arg(long)]
    pub check: Option<String>,
    /// Moment order of the displacement check
    #[arg(long)]
    pub p: Option<f64>,
    /// Exponent of the integrability check
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Exponential-moment integrand: segment, drift, h<k> or h<k>:<factor>
    #[arg(long)]
    pub quantity: Option<String>,
    /// Lambda grid of the exponential-moment sweep
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Random samples of the Lyapunov check
    #[arg(long)]
    pub samples: Option<usize>,
    /// Lyapunov weights alpha,beta,gamma
    #[arg(long, value_delimiter = ',', value_name = "A,B,G")]
    pub lyapunov: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    model: Option<String>,
    scheme: Option<String>,
    alpha: Option<f64>,
    d: Option<usize>,
    sigma: Option<f64>,
    tau: Option<f64>,
    #[serde(default)]
    param: BTreeMap<String, toml::Value>,
    levels: Option<Vec<usize>>,
    t: Option<f64>,
    m: Option<usize>,
    paths: Option<usize>,
    seed: Option<u64>,
    payoff: Option<String>,
    m_ref: Option<usize>,
    out: Option<PathBuf>,
    strict_sequential: Option<bool>,
    threads: Option<usize>,
    force_t: Option<bool>,
    reference_bias: Option<bool>,
    expect_order: Option<Vec<f64>>,
    variant: Option<String>,
    check: Option<String>,
    p: Option<f64>,
    kappa: Option<f64>,
    quantity: Option<String>,
    lambdas: Option<Vec<f64>>,
    samples: Option<usize>,
    lyapunov: Option<Vec<f64>>,
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
}

fn toml_scalar(key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => bail!("param.{key}: expected a scalar, got {other}"),
    }
}

/// Fully resolved experiment settings, embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub model: Option<String>,
    pub params: BTreeMap<String, String>,
    pub scheme: Option<String>,
    pub levels: Vec<usize>,
    pub t: f64,
    pub m: usize,
    pub paths: usize,
    pub seed: u64,
    pub payoff: String,
    pub m_ref: Option<usize>,
    pub out: Option<PathBuf>,
    pub strict_sequential: bool,
    pub threads: Option<usize>,
    pub force_t: bool,
    pub reference_bias: bool,
    pub expect_order: Option<[f64; 2]>,
    pub variant: String,
    pub check: Option<String>,
    pub p: f64,
    pub kappa: Option<f64>,
    pub quantity: String,
    pub lambdas: Option<Vec<f64>>,
    pub samples: usize,
    pub lyapunov: [f64; 3],
    pub config_file: Option<PathBuf>,
}

fn pair(name: &str, v: Option<Vec<f64>>) -> Result<Option<[f64; 2]>> {
    match v {
        None => Ok(None),
        Some(v) if v.len() == 2 && v[0] <= v[1] => Ok(Some([v[0], v[1]])),
        Some(v) => bail!("--{name}: expected lo,hi with lo <= hi, got {v:?}"),
    }
}

impl ExperimentConfig {
    /// Merges the flags over the optional config file and fills defaults.
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let mut params = BTreeMap::new();
        for (k, v) in &file.param {
            params.insert(k.clone(), toml_scalar(k, v)?);
        }
        let mut set = |key: &str, flag: Option<String>, file: Option<String>| {
            if let Some(v) = flag.or(file) {
                params.insert(key.to_string(), v);
            }
        };
        set(
            "alpha",
            flags.alpha.map(|v| v.to_string()),
            file.alpha.map(|v| v.to_string()),
        );
        set(
            "d",
            flags.d.map(|v| v.to_string()),
            file.d.map(|v| v.to_string()),
        );
        set(
            "sigma",
            flags.sigma.map(|v| v.to_string()),
            file.sigma.map(|v| v.to_string()),
        );
        set(
            "tau",
            flags.tau.map(|v| v.to_string()),
            file.tau.map(|v| v.to_string()),
        );
        for kv in &flags.params {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("--param: expected KEY=VALUE, got `{kv}`"))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let lyapunov = match flags.lyapunov.clone().or(file.lyapunov) {
            None => [2.0, 2.0, 1.0],
            Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
            Some(v) => bail!("--lyapunov: expected alpha,beta,gamma, got {v:?}"),
        };
        let cfg = Self {
            model: flags.model.clone().or(file.model),
            params,
            scheme: flags.scheme.clone().or(file.scheme),
            levels: flags
                .levels
                .clone()
                .or(file.levels)
                .unwrap_or_else(|| vec![8, 16, 32, 64]),
            t: flags.t.or(file.t).unwrap_or(1.0),
            m: flags.m.or(file.m).unwrap_or(64),
            paths: flags.paths.or(file.paths).unwrap_or(10_000),
            seed: flags.seed.or(file.seed).unwrap_or(1),
            payoff: flags
                .payoff
                .clone()
                .or(file.payoff)
                .unwrap_or_else(|| "sin:0".into()),
            m_ref: flags.m_ref.or(file.m_ref),
            out: flags.out.clone().or(file.out),
            strict_sequential: flags.strict_sequential || file.strict_sequential.unwrap_or(false),
            threads: flags.threads.or(file.threads),
            force_t: flags.force_t || file.force_t.unwrap_or(false),
            reference_bias: flags.reference_bias || file.reference_bias.unwrap_or(false),
            expect_order: pair(
                "expect-order",
                flags.expect_order.clone().or(file.expect_order),
            )?,
            variant: flags
                .variant
                .clone()
                .or(file.variant)
                .unwrap_or_else(|| "r1".into()),
            check: flags.check.clone().or(file.check),
            p: flags.p.or(file.p).unwrap_or(4.0),
            kappa: flags.kappa.or(file.kappa),
            quantity: flags
                .quantity
                .clone()
                .or(file.quantity)
                .unwrap_or_else(|| "segment".into()),
            lambdas: flags.lambdas.clone().or(file.lambdas),
            samples: flags.samples.or(file.samples).unwrap_or(10_000),
            lyapunov,
            config_file: flags.config.clone(),
        };
        if cfg.paths == 0 {
            bail!("--paths: need at least one path");
        }
        if cfg.t.is_nan() || cfg.t <= 0.0 {
            bail!("--t: horizon must be positive, got {}", cfg.t);
        }
        Ok(cfg)
    }

    /// Builds the catalog model; parameter errors name the offending field.
    pub fn model(&self) -> Result<SdeModel> {
        let name = self
            .model
            .as_deref()
            .ok_or_else(|| anyhow!("--model is required"))?;
        builtin_model(name, &self.params).map_err(|e| anyhow!("--model/--param: {e}"))
    }

    /// The configured scheme, or the natural one for the model.
    pub fn scheme(&self, model: &SdeModel) -> Result<SchemeKind> {
        let s = match &self.scheme {
            Some(s) => s.parse().map_err(|e| anyhow!("--scheme: {e}"))?,
            None => SchemeKind::reference_for(model),
        };
        s.check(model).map_err(|e| anyhow!("--scheme: {e}"))?;
        Ok(s)
    }

    pub fn payoff(&self, model: &SdeModel) -> Result<Payoff> {
        let p: Payoff = self.payoff.parse().map_err(|e| anyhow!("--payoff: {e}"))?;
        let coord = match p {
            Payoff::Sin { coord }
            | Payoff::Indicator { coord, .. }
            | Payoff::Clamp { coord, .. } => coord,
            Payoff::Constant { .. } => 0,
        };
        if coord >= model.state_dim() {
            bail!(
                "--payoff: coordinate {coord} outside the state dimension {}",
                model.state_dim()
            );
        }
        Ok(p)
    }

    pub fn execution(&self) -> Execution {
        if self.strict_sequential {
            Execution::Sequential
        } else {
            Execution::Parallel {
                threads: self.threads,
            }
        }
    }
}
