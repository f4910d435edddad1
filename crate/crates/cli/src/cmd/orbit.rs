use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use flowbox_core::io::write_orbit_csv;
use flowbox_core::odeint::{trace_orbit, trace_orbit_uniform};
use flowbox_core::IntegratorConfig;

use super::{write_output, Outcome, SystemRef};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitConfig {
    pub system: SystemRef,
    pub x0: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
    /// Uniform sample count; accepted integrator steps when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
}

#[derive(Debug, Args)]
pub struct OrbitArgs {
    #[arg(long)]
    pub system: Option<String>,
    /// Initial point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// End time; negative values integrate backward.
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "flowbox-out")]
    pub out: PathBuf,
}

fn parse_point(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad coordinate `{v}` in --x0"))))
        .collect()
}

impl OrbitArgs {
    pub fn to_config(&self) -> CliResult<OrbitConfig> {
        let base = match &self.config {
            Some(path) => Some(serde_json::from_str::<OrbitConfig>(&fs::read_to_string(path)?)?),
            None => None,
        };
        let system = match (&self.system, &base) {
            (Some(s), _) => SystemRef::resolve(s)?,
            (None, Some(b)) => b.system.clone(),
            (None, None) => return Err(CliError::Usage("--system is required".into())),
        };
        let x0 = match (&self.x0, &base) {
            (Some(s), _) => parse_point(s)?,
            (None, Some(b)) => b.x0.clone(),
            (None, None) => return Err(CliError::Usage("--x0 is required".into())),
        };
        let t1 = match (self.t, &base) {
            (Some(t), _) => t,
            (None, Some(b)) => b.t1,
            (None, None) => return Err(CliError::Usage("--t is required".into())),
        };
        let mut integrator = base.as_ref().map(|b| b.integrator.clone()).unwrap_or_default();
        if let Some(tol) = self.tol {
            integrator = IntegratorConfig {
                horizon: integrator.horizon,
                ..IntegratorConfig::rk45(tol)
            };
        }
        integrator.horizon = integrator.horizon.max(t1.abs());
        Ok(OrbitConfig {
            system,
            x0,
            t0: base.as_ref().map(|b| b.t0).unwrap_or(0.0),
            t1,
            samples: self.samples.or(base.and_then(|b| b.samples)),
            integrator,
        })
    }
}

pub fn execute(cfg: &OrbitConfig, out: &Path) -> CliResult<Outcome> {
    let field = cfg.system.build()?;
    let orbit = match cfg.samples {
        Some(n) => trace_orbit_uniform(&field, &cfg.x0, (cfg.t0, cfg.t1), n, &cfg.integrator)?,
        None => trace_orbit(&field, &cfg.x0, (cfg.t0, cfg.t1), &cfg.integrator)?,
    };
    let mut outcome = Outcome::default();
    outcome.outputs.push(write_output(out, "orbit.csv", |w| Ok(write_orbit_csv(w, &orbit)?))?);
    let (t, x) = orbit.end();
    outcome.metric("samples", orbit.samples.len());
    outcome.metric("t_end", *t);
    outcome.metric("x_end", x.clone());
    outcome.message = Some(format!("{} samples, x({t}) = {x:?}", orbit.samples.len()));
    Ok(outcome)
}
