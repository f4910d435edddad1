use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use flowbox_core::chart::{check_nonrecurrent, check_transversal, Chart, Surface, SurfaceSpec, TRANSVERSALITY_TOL};
use flowbox_core::io::{status_label, write_chart_grid_csv};
use flowbox_core::IntegratorConfig;

use super::{pool, resolve_surface, write_json, write_output, Outcome, SystemRef};
use crate::error::{CliError, CliResult};
use crate::grid::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartConfig {
    pub system: SystemRef,
    pub surface: SurfaceSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default = "default_audit_orbits")]
    pub audit_orbits: usize,
    #[serde(default = "default_audit_horizon")]
    pub audit_horizon: f64,
    /// Build the chart even when the surface audits fail.
    #[serde(default)]
    pub force: bool,
}

fn default_audit_orbits() -> usize {
    32
}

fn default_audit_horizon() -> f64 {
    4.0 * std::f64::consts::PI
}

#[derive(Debug, Args)]
pub struct ChartArgs {
    /// Built-in system name or JSON system file.
    #[arg(long)]
    pub system: Option<String>,
    /// Surface shorthand (segment:a1,a2,b1,b2 | circle:cx,cy,r[,θ0] | point:c | plane:axis,value,lo,hi,..),
    /// inline JSON or a JSON file. Defaults to the registry surface.
    #[arg(long, allow_hyphen_values = true)]
    pub surface: Option<String>,
    /// Evaluation grid, LOxHI[xRES],...
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Integrator tolerance (RK45 absolute and relative).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Time horizon of the crossing search.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub force: bool,
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "flowbox-out")]
    pub out: PathBuf,
}

impl ChartArgs {
    pub fn to_config(&self) -> CliResult<ChartConfig> {
        let mut cfg = match &self.config {
            Some(path) => Some(serde_json::from_str::<ChartConfig>(&fs::read_to_string(path)?)?),
            None => None,
        };
        if let Some(c) = cfg.as_mut() {
            if let Some(s) = &self.system {
                c.system = SystemRef::resolve(s)?;
            }
            if let Some(s) = &self.surface {
                c.surface = resolve_surface(Some(s), &c.system)?;
            }
            if let Some(g) = &self.grid {
                c.grid = g.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
            }
        }
        let mut cfg = match cfg {
            Some(c) => c,
            None => {
                let system = SystemRef::resolve(self.system.as_deref().ok_or_else(|| CliError::Usage("--system is required".into()))?)?;
                let surface = resolve_surface(self.surface.as_deref(), &system)?;
                let grid = self
                    .grid
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("--grid is required".into()))?
                    .parse()
                    .map_err(|e| CliError::Usage(format!("{e}")))?;
                ChartConfig {
                    system,
                    surface,
                    grid,
                    integrator: IntegratorConfig::default(),
                    audit_orbits: default_audit_orbits(),
                    audit_horizon: default_audit_horizon(),
                    force: false,
                }
            }
        };
        if let Some(t) = self.tol {
            cfg.integrator = IntegratorConfig {
                horizon: cfg.integrator.horizon,
                ..IntegratorConfig::rk45(t)
            };
        }
        if let Some(h) = self.horizon {
            cfg.integrator.horizon = h;
        }
        cfg.force |= self.force;
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
struct AuditReport {
    transversal: bool,
    /// Smallest `|⟨n, P⟩|` over the transversality samples.
    min_normal_speed: f64,
    nonrecurrence: flowbox_core::NonRecurrenceReport,
    passed: bool,
}

pub fn execute(cfg: &ChartConfig, out: &Path) -> CliResult<Outcome> {
    cfg.integrator.validate()?;
    let field = cfg.system.build()?;
    let surface = Surface::from_spec(&cfg.surface)?;
    if cfg.grid.dim() != field.dim() {
        return Err(CliError::Usage(format!(
            "grid has {} axes but `{}` has dimension {}",
            cfg.grid.dim(),
            cfg.system.name,
            field.dim()
        )));
    }
    let samples = check_transversal(&surface, &field, 64)?;
    let min_speed = samples.iter().map(|(_, v)| v.abs()).fold(f64::INFINITY, f64::min);
    let nonrec = check_nonrecurrent(&surface, &field, cfg.audit_orbits, cfg.audit_horizon, &cfg.integrator)?;
    let transversal = min_speed >= TRANSVERSALITY_TOL;
    let audit = AuditReport {
        transversal,
        min_normal_speed: min_speed,
        passed: transversal && nonrec.passed(),
        nonrecurrence: nonrec,
    };
    let mut outcome = Outcome::default();
    outcome.outputs.push(write_json(out, "audit.json", &audit)?);
    outcome.metric("audit_passed", audit.passed);
    outcome.metric("recurrent_orbits", audit.nonrecurrence.violations.len());
    outcome.metric("min_normal_speed", min_speed);
    if !audit.passed && !cfg.force {
        outcome.exit_code = 2;
        let mut msg = format!(
            "surface audit failed for `{}`: transversal = {}, {} of {} seeded orbits meet the surface more than once",
            cfg.system.name,
            transversal,
            audit.nonrecurrence.violations.len(),
            audit.nonrecurrence.tested_points
        );
        if let Some((x0, times)) = audit.nonrecurrence.violations.first() {
            msg.push_str(&format!("; e.g. the orbit of {x0:?} crosses at t = {times:?}"));
        }
        msg.push_str(" (use --force to build anyway)");
        outcome.message = Some(msg);
        return Ok(outcome);
    }
    let chart = Chart::new_unchecked(field, surface, cfg.integrator.clone())?;
    let points = cfg.grid.points();
    let rows: Vec<_> = pool()?.install(|| points.into_par_iter().map(|x| {
        let r = chart.locate(&x);
        (x, r)
    }).collect());
    outcome
        .outputs
        .push(write_output(out, "chart.csv", |w| Ok(write_chart_grid_csv(w, chart.dim(), &rows)?))?);
    let mut counts = serde_json::Map::new();
    for (_, r) in &rows {
        let entry = counts.entry(status_label(r)).or_insert(0.into());
        *entry = (entry.as_u64().unwrap_or(0) + 1).into();
    }
    let ok = rows.iter().filter(|(_, r)| r.is_ok()).count();
    outcome.metric("points", rows.len());
    outcome.metric("ok_fraction", ok as f64 / rows.len().max(1) as f64);
    outcome.metric("status_counts", counts);
    outcome.message = Some(format!("{ok} of {} grid points located in the chart", rows.len()));
    Ok(outcome)
}
