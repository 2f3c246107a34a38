//! Run configuration: a flat JSON document whose every key can be
//! overridden by the command-line flag of the same name.

use std::path::{Path, PathBuf};

use clap::Args;
use nalgebra::DMatrix;
use psir::calibration::ModelValues;
use psir::network::validate_mobility;
use psir::{chain_mobility, FitParam, IntegratorConfig, NetParams, Observable};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Model to run: `agg` (aggregated) or `net` (metapopulation)
    #[arg(long)]
    pub model: Option<String>,

    /// Transmission rate (1/day)
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Recovery rate (1/day)
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Spatial-advance coefficient (1/day)
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Connectivity scale inside the saturation
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Rate at which active districts move to finished (1/day)
    #[arg(long = "beta-r", alias = "beta_r", allow_negative_numbers = true)]
    pub beta_r: Option<f64>,
    /// Total population
    #[arg(long, allow_negative_numbers = true)]
    pub n: Option<f64>,
    /// Initial infected (agg)
    #[arg(long, allow_negative_numbers = true)]
    pub i0: Option<f64>,
    /// Initial active-region population (agg)
    #[arg(long, allow_negative_numbers = true)]
    pub pi0: Option<f64>,

    /// `chain:D:p` or a path to a row-stochastic matrix CSV (net)
    #[arg(long)]
    pub mobility: Option<String>,
    /// District populations, comma separated; defaults to N split evenly (net)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub populations: Option<Vec<f64>>,
    /// District holding the first infections, numbered from 1 (net)
    #[arg(long = "seed-district", alias = "seed_district")]
    pub seed_district: Option<usize>,
    /// Number of initially infected in the seed district (net)
    #[arg(long = "seed-size", alias = "seed_size", allow_negative_numbers = true)]
    pub seed_size: Option<f64>,

    /// Final simulation time (days)
    #[arg(long = "t-end", alias = "t_end", allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// `rk4` or `rk45`
    #[arg(long)]
    pub method: Option<String>,
    /// Fixed step for rk4 (days)
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long = "rel-tol", alias = "rel_tol", allow_negative_numbers = true)]
    pub rel_tol: Option<f64>,
    #[arg(long = "abs-tol", alias = "abs_tol", allow_negative_numbers = true)]
    pub abs_tol: Option<f64>,
    #[arg(long = "max-steps", alias = "max_steps")]
    pub max_steps: Option<usize>,

    /// Output file (trajectory CSV, or report for `fit`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional SVG chart
    #[arg(long)]
    pub svg: Option<PathBuf>,

    /// Observed case series (fit)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated free parameters from rho, beta_R, alpha, beta, pI0 (fit)
    #[arg(long)]
    pub free: Option<String>,
    /// `prevalence` or `daily-incidence` (fit)
    #[arg(long)]
    pub observable: Option<String>,
    /// Moving-average window, odd (fit)
    #[arg(long)]
    pub window: Option<usize>,
    /// Population used to normalise counts (fit)
    #[arg(long, allow_negative_numbers = true)]
    pub pop: Option<f64>,
    /// Under-detection factor applied to counts (fit)
    #[arg(long, allow_negative_numbers = true)]
    pub detect: Option<f64>,
    /// Cap on optimiser trial steps (fit)
    #[arg(long = "max-iterations", alias = "max_iterations")]
    pub max_iterations: Option<usize>,

    #[arg(long = "init-rho", alias = "init_rho", allow_negative_numbers = true)]
    pub init_rho: Option<f64>,
    #[arg(
        long = "init-beta-r",
        alias = "init_beta_r",
        allow_negative_numbers = true
    )]
    pub init_beta_r: Option<f64>,
    #[arg(
        long = "init-alpha",
        alias = "init_alpha",
        allow_negative_numbers = true
    )]
    pub init_alpha: Option<f64>,
    #[arg(long = "init-beta", alias = "init_beta", allow_negative_numbers = true)]
    pub init_beta: Option<f64>,
    #[arg(long = "init-pi0", alias = "init_pi0", allow_negative_numbers = true)]
    pub init_pi0: Option<f64>,
}

macro_rules! overlay {
    ($base:expr, $over:expr, $($field:ident),* $(,)?) => {
        Settings { $($field: $over.$field.or($base.$field)),* }
    };
}

impl Settings {
    /// Loads `path` (if given) and applies `overrides` on top.
    pub fn resolve(path: Option<&Path>, overrides: Settings) -> Result<Settings, CliError> {
        let base = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Invalid(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::Invalid(format!("invalid config {}: {e}", p.display()))
                })?
            }
            None => Settings::default(),
        };
        Ok(overlay!(
            base,
            overrides,
            model,
            beta,
            gamma,
            rho,
            alpha,
            beta_r,
            n,
            i0,
            pi0,
            mobility,
            populations,
            seed_district,
            seed_size,
            t_end,
            method,
            dt,
            rel_tol,
            abs_tol,
            max_steps,
            out,
            svg,
            data,
            free,
            observable,
            window,
            pop,
            detect,
            max_iterations,
            init_rho,
            init_beta_r,
            init_alpha,
            init_beta,
            init_pi0,
        ))
    }

    pub fn model(&self) -> Result<ModelKind, CliError> {
        match self.model.as_deref() {
            Some("agg") => Ok(ModelKind::Agg),
            Some("net") => Ok(ModelKind::Net),
            Some(other) => Err(CliError::Invalid(format!(
                "model must be 'agg' or 'net', got '{other}'"
            ))),
            None => Err(CliError::Invalid("missing 'model'".into())),
        }
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, CliError> {
        let mut cfg = match self.method.as_deref().unwrap_or("rk4") {
            "rk4" | "fixed-rk4" => IntegratorConfig::rk4(self.dt.unwrap_or(0.05)),
            "rk45" | "adaptive-rk45" => {
                IntegratorConfig::rk45(self.rel_tol.unwrap_or(1e-9), self.abs_tol.unwrap_or(1e-12))
            }
            other => {
                return Err(CliError::Invalid(format!(
                    "method must be 'rk4' or 'rk45', got '{other}'"
                )))
            }
        };
        if let Some(m) = self.max_steps {
            cfg.max_steps = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn t_end(&self) -> Result<f64, CliError> {
        match self.t_end {
            Some(t) if t > 0.0 && t.is_finite() => Ok(t),
            Some(t) => Err(CliError::Invalid(format!(
                "t_end must be positive, got {t}"
            ))),
            None => Err(CliError::Invalid("missing 't_end'".into())),
        }
    }

    /// Model values for the aggregated model. Missing entries are an error
    /// unless listed in `optional`, which fall back to the default starting
    /// value of that parameter.
    pub fn model_values(&self, optional: &[FitParam]) -> Result<ModelValues, CliError> {
        let need = |name: &str, v: Option<f64>, param: Option<FitParam>| -> Result<f64, CliError> {
            match (v, param) {
                (Some(v), _) => Ok(v),
                (None, Some(p)) if optional.contains(&p) => Ok(p.default_init()),
                _ => Err(CliError::Invalid(format!("missing '{name}'"))),
            }
        };
        Ok(ModelValues {
            beta: need("beta", self.beta, Some(FitParam::Beta))?,
            gamma: need("gamma", self.gamma, None)?,
            rho: need("rho", self.rho, Some(FitParam::Rho))?,
            alpha: need("alpha", self.alpha, Some(FitParam::Alpha))?,
            beta_r: need("beta_r", self.beta_r, Some(FitParam::BetaR))?,
            p_i0: need("pi0", self.pi0, Some(FitParam::PI0))?,
            i0: need("i0", self.i0, None)?,
            n: self.n.unwrap_or(1.0),
        })
    }

    pub fn net_params(&self) -> Result<NetParams, CliError> {
        let beta = self
            .beta
            .ok_or_else(|| CliError::Invalid("missing 'beta'".into()))?;
        let gamma = self
            .gamma
            .ok_or_else(|| CliError::Invalid("missing 'gamma'".into()))?;
        let spec = self
            .mobility
            .as_deref()
            .ok_or_else(|| CliError::Invalid("missing 'mobility'".into()))?;
        let mobility = parse_mobility(spec)?;
        let params = match &self.populations {
            Some(p) => NetParams::new(
                beta,
                gamma,
                nalgebra::DVector::from_vec(p.clone()),
                mobility,
            )?,
            None => NetParams::uniform(beta, gamma, self.n.unwrap_or(1.0), mobility)?,
        };
        Ok(params)
    }

    pub fn free_params(&self) -> Result<Vec<FitParam>, CliError> {
        let list = self
            .free
            .as_deref()
            .ok_or_else(|| CliError::Invalid("missing 'free' parameter list".into()))?;
        list.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<FitParam>().map_err(CliError::from))
            .collect()
    }

    pub fn init_for(&self, p: FitParam) -> Option<f64> {
        match p {
            FitParam::Rho => self.init_rho.or(self.rho),
            FitParam::BetaR => self.init_beta_r.or(self.beta_r),
            FitParam::Alpha => self.init_alpha.or(self.alpha),
            FitParam::Beta => self.init_beta.or(self.beta),
            FitParam::PI0 => self.init_pi0.or(self.pi0),
        }
    }

    pub fn observable(&self) -> Result<Observable, CliError> {
        self.observable
            .as_deref()
            .unwrap_or("daily-incidence")
            .parse()
            .map_err(CliError::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Agg,
    Net,
}

/// `chain:D:p`, or a CSV file of `D` rows with `D` comma-separated entries.
pub fn parse_mobility(spec: &str) -> Result<DMatrix<f64>, CliError> {
    if let Some(rest) = spec.strip_prefix("chain:") {
        let (d, p) = rest.split_once(':').ok_or_else(|| {
            CliError::Invalid(format!("mobility '{spec}' is not of the form chain:D:p"))
        })?;
        let d: usize = d
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("bad district count in '{spec}'")))?;
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("bad neighbour fraction in '{spec}'")))?;
        return Ok(chain_mobility(d, p)?);
    }
    let text = std::fs::read_to_string(spec)
        .map_err(|e| CliError::Invalid(format!("cannot read mobility matrix {spec}: {e}")))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, line)| {
            line.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Invalid(format!("{spec} line {}: {e}", k + 1)))
        })
        .collect::<Result<_, _>>()?;
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Invalid(format!("{spec} is not a square matrix")));
    }
    let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
    validate_mobility(&m)?;
    Ok(m)
}
