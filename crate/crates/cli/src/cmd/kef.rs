use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use flowbox_core::chart::{Chart, Surface, SurfaceSpec};
use flowbox_core::expr::{indexed_names, parse, Expr};
use flowbox_core::io::{write_residual_csv, ResidualRow};
use flowbox_core::kef::{kpde_residual, MinimalSet};
use flowbox_core::{Complex64, Error, IntegratorConfig};

use super::{parse_lambda, pool, resolve_surface, write_output, Outcome, SystemRef};
use crate::error::{CliError, CliResult};
use crate::grid::GridSpec;

/// The measurement under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Candidate {
    /// `re + i·im` written in the variables `x1..xN`.
    Expression {
        re: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<String>,
        lambda: Complex64,
    },
    /// `h_i e^m` and `e^m` from the characteristics chart on `surface`.
    MinimalSet { surface: SurfaceSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KefConfig {
    pub system: SystemRef,
    pub candidate: Candidate,
    pub grid: GridSpec,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default = "chart_integrator")]
    pub integrator: IntegratorConfig,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_fd_step() -> f64 {
    1e-5
}

/// Finite differences of chart values need the crossing located well below the step.
pub fn chart_integrator() -> IntegratorConfig {
    IntegratorConfig {
        event_tol: 1e-15,
        ..IntegratorConfig::rk45(1e-12)
    }
}

#[derive(Debug, Args)]
pub struct KefArgs {
    #[arg(long)]
    pub system: Option<String>,
    /// Real part of the candidate eigenfunction in x1..xN.
    #[arg(long, conflicts_with = "minimal_set")]
    pub phi: Option<String>,
    /// Imaginary part of the candidate.
    #[arg(long, requires = "phi")]
    pub phi_im: Option<String>,
    /// Eigenvalue, RE[+IMi].
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    /// Check the chart-built minimal set instead of an expression.
    #[arg(long)]
    pub minimal_set: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub surface: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Pass threshold on max |∇Φ·P − λΦ|.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "flowbox-out")]
    pub out: PathBuf,
}

impl KefArgs {
    pub fn to_config(&self) -> CliResult<KefConfig> {
        let base = match &self.config {
            Some(path) => Some(serde_json::from_str::<KefConfig>(&fs::read_to_string(path)?)?),
            None => None,
        };
        let system = match (&self.system, &base) {
            (Some(s), _) => SystemRef::resolve(s)?,
            (None, Some(b)) => b.system.clone(),
            (None, None) => return Err(CliError::Usage("--system is required".into())),
        };
        let candidate = if self.minimal_set {
            Candidate::MinimalSet {
                surface: resolve_surface(self.surface.as_deref(), &system)?,
            }
        } else if let Some(re) = &self.phi {
            let lambda = self
                .lambda
                .as_deref()
                .ok_or_else(|| CliError::Usage("--lambda is required with --phi".into()))?;
            Candidate::Expression {
                re: re.clone(),
                im: self.phi_im.clone(),
                lambda: parse_lambda(lambda)?,
            }
        } else if let Some(b) = &base {
            b.candidate.clone()
        } else {
            return Err(CliError::Usage("pass --phi EXPR --lambda L or --minimal-set".into()));
        };
        let grid = match (&self.grid, &base) {
            (Some(g), _) => g.parse().map_err(|e| CliError::Usage(format!("{e}")))?,
            (None, Some(b)) => b.grid.clone(),
            (None, None) => return Err(CliError::Usage("--grid is required".into())),
        };
        let base_tol = base.as_ref().map(|b| b.tol).unwrap_or_else(default_tol);
        let base_fd = base.as_ref().map(|b| b.fd_step).unwrap_or_else(default_fd_step);
        Ok(KefConfig {
            system,
            candidate,
            grid,
            tol: self.tol.unwrap_or(base_tol),
            fd_step: self.fd_step.unwrap_or(base_fd),
            integrator: base.map(|b| b.integrator).unwrap_or_else(chart_integrator),
        })
    }
}

fn summary(rows: &[ResidualRow]) -> (f64, f64, usize) {
    let vals: Vec<f64> = rows.iter().filter_map(|r| r.residual.map(|c| c.norm())).collect();
    let max = vals.iter().copied().fold(0.0, f64::max);
    let mean = if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 };
    (max, mean, vals.len())
}

fn status_of(e: &Error) -> String {
    match e {
        Error::OutOfDomain { .. } | Error::LeftDomain { .. } => "out-of-domain",
        Error::NotInOmega { .. } => "not-in-omega",
        Error::AmbiguousChart { .. } => "ambiguous",
        Error::OutsidePatch { .. } => "outside-patch",
        Error::Eval(_) | Error::NonFinite { .. } => "eval-error",
        _ => "integration-failure",
    }
    .to_string()
}

fn row(x: Vec<f64>, member: &str, r: flowbox_core::Result<Complex64>) -> ResidualRow {
    match r {
        Ok(v) => ResidualRow {
            x,
            member: member.to_string(),
            residual: Some(v),
            status: "ok".into(),
        },
        Err(e) => ResidualRow {
            x,
            member: member.to_string(),
            residual: None,
            status: status_of(&e),
        },
    }
}

pub fn execute(cfg: &KefConfig, out: &Path) -> CliResult<Outcome> {
    let field = cfg.system.build()?;
    let n = field.dim();
    if cfg.grid.dim() != n {
        return Err(CliError::Usage(format!("grid has {} axes, system has dimension {n}", cfg.grid.dim())));
    }
    if !(cfg.fd_step > 0.0) || !(cfg.tol > 0.0) {
        return Err(CliError::Usage("tol and fd_step must be positive".into()));
    }
    let points = cfg.grid.points();
    let threads = pool()?;
    let rows: Vec<ResidualRow> = match &cfg.candidate {
        Candidate::Expression { re, im, lambda } => {
            let names = indexed_names("x", n);
            let re_e = parse(re, &names).map_err(|e| CliError::Usage(format!("--phi: {e}")))?;
            let im_e: Option<Expr> = im
                .as_deref()
                .map(|s| parse(s, &names).map_err(|e| CliError::Usage(format!("--phi-im: {e}"))))
                .transpose()?;
            let phi = |x: &[f64]| -> flowbox_core::Result<Complex64> {
                let a = re_e.eval(x)?;
                let b = match &im_e {
                    Some(e) => e.eval(x)?,
                    None => 0.0,
                };
                Ok(Complex64::new(a, b))
            };
            threads.install(|| {
                points
                    .into_par_iter()
                    .map(|x| {
                        let r = kpde_residual(phi, *lambda, &field, &x, cfg.fd_step);
                        row(x, "phi", r)
                    })
                    .collect()
            })
        }
        Candidate::MinimalSet { surface } => {
            let chart = Arc::new(Chart::new(field.clone(), Surface::from_spec(surface)?, cfg.integrator.clone())?);
            let set = MinimalSet::unaudited(chart);
            let members = &set.members;
            threads.install(|| {
                points
                    .into_par_iter()
                    .flat_map_iter(|x| {
                        members
                            .iter()
                            .enumerate()
                            .map(|(i, m)| {
                                let r = kpde_residual(|p| m.eval(p), m.lambda(), &field, &x, cfg.fd_step);
                                row(x.clone(), &format!("phi{}", i + 1), r)
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect()
            })
        }
    };
    let mut outcome = Outcome::default();
    outcome
        .outputs
        .push(write_output(out, "residuals.csv", |w| Ok(write_residual_csv(w, n, &rows)?))?);
    let (max, mean, evaluated) = summary(&rows);
    outcome.metric("max_abs_residual", max);
    outcome.metric("mean_abs_residual", mean);
    outcome.metric("evaluated", evaluated);
    outcome.metric("failed_points", rows.len() - evaluated);
    outcome.metric("tol", cfg.tol);
    let verdict = if evaluated == 0 {
        outcome.exit_code = 3;
        "no point could be evaluated"
    } else if max <= cfg.tol {
        "pass"
    } else {
        outcome.exit_code = 2;
        "fail"
    };
    outcome.metric("passed", outcome.exit_code == 0);
    outcome.message = Some(format!(
        "max |residual| = {max:.3e}, mean = {mean:.3e} over {evaluated} points ({} skipped): {verdict}",
        rows.len() - evaluated
    ));
    Ok(outcome)
}
