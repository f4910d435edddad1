use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use flowbox_core::io::{fmt_num, write_grid_field_csv};
use flowbox_core::varfit::{fit, rotate_to_flowbox, Diagnostics, FitConfig, Optimizer, PRNG_NAME};
use flowbox_core::varfit::Loss;

use super::{write_json, write_output, Outcome, SystemRef};
use crate::error::{CliError, CliResult};
use crate::grid::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarfitConfig {
    pub system: SystemRef,
    /// Box and node counts of the finest grid.
    pub grid: GridSpec,
    #[serde(default)]
    pub fit: FitConfig,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Lm,
    Momentum,
}

#[derive(Debug, Args)]
pub struct VarfitArgs {
    #[arg(long)]
    pub system: Option<String>,
    /// Fit box and resolution, LOxHIxRES,...
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Iteration cap per grid level.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub weight_a: Option<f64>,
    #[arg(long)]
    pub weight_b: Option<f64>,
    /// Learning rate of the momentum optimizer.
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "flowbox-out")]
    pub out: PathBuf,
}

impl VarfitArgs {
    pub fn to_config(&self) -> CliResult<VarfitConfig> {
        let base = match &self.config {
            Some(path) => Some(serde_json::from_str::<VarfitConfig>(&fs::read_to_string(path)?)?),
            None => None,
        };
        let system = match (&self.system, &base) {
            (Some(s), _) => SystemRef::resolve(s)?,
            (None, Some(b)) => b.system.clone(),
            (None, None) => return Err(CliError::Usage("--system is required".into())),
        };
        let grid = match (&self.grid, &base) {
            (Some(g), _) => g.parse().map_err(|e| CliError::Usage(format!("{e}")))?,
            (None, Some(b)) => b.grid.clone(),
            (None, None) => return Err(CliError::Usage("--grid is required".into())),
        };
        let mut fit = base.map(|b| b.fit).unwrap_or_default();
        if let Some(s) = self.seed {
            fit.seed = s;
        }
        if let Some(i) = self.iterations {
            fit.iterations = i;
        }
        if let Some(o) = self.optimizer {
            fit.optimizer = match o {
                OptimizerArg::Lm => Optimizer::LevenbergMarquardt,
                OptimizerArg::Momentum => Optimizer::Momentum,
            };
        }
        if let Some(w) = self.weight_a {
            fit.weight_a = w;
        }
        if let Some(w) = self.weight_b {
            fit.weight_b = w;
        }
        if let Some(s) = self.step_size {
            fit.step_size = s;
        }
        Ok(VarfitConfig { system, grid, fit })
    }
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    system: &'a str,
    lo: Vec<f64>,
    hi: Vec<f64>,
    shape: Vec<usize>,
    config: &'a FitConfig,
    seed: u64,
    prng: &'static str,
    iterations: usize,
    final_loss: &'a Loss,
    diagnostics: &'a Diagnostics,
    flagged: bool,
}

pub fn execute(cfg: &VarfitConfig, out: &Path) -> CliResult<Outcome> {
    let field = cfg.system.build()?;
    cfg.fit.validate()?;
    let (lo, hi, shape) = (cfg.grid.lo(), cfg.grid.hi(), cfg.grid.shape());
    let result = fit(&field, &lo, &hi, &shape, &cfg.fit)?;
    let mut outcome = Outcome::default();
    outcome
        .outputs
        .push(write_output(out, "field.csv", |w| Ok(write_grid_field_csv(w, &result.field)?))?);
    let rotated = rotate_to_flowbox(&result.field);
    outcome
        .outputs
        .push(write_output(out, "flowbox.csv", |w| Ok(write_grid_field_csv(w, &rotated)?))?);
    outcome.outputs.push(write_output(out, "loss_history.csv", |w| {
        use std::io::Write;
        writeln!(w, "level,nodes,iteration,loss")?;
        for (k, level) in result.levels.iter().enumerate() {
            let nodes: usize = level.shape.iter().product();
            for (i, l) in level.loss_history.iter().enumerate() {
                writeln!(w, "{k},{nodes},{},{}", i + 1, fmt_num(*l))?;
            }
        }
        Ok(())
    })?);
    let sidecar = Sidecar {
        system: &cfg.system.name,
        lo,
        hi,
        shape,
        config: &cfg.fit,
        seed: cfg.fit.seed,
        prng: PRNG_NAME,
        iterations: result.iterations,
        final_loss: &result.final_loss,
        diagnostics: &result.diagnostics,
        flagged: result.flagged,
    };
    outcome.outputs.push(write_json(out, "field.json", &sidecar)?);
    let d = &result.diagnostics;
    outcome.metric("final_loss", result.final_loss.total);
    outcome.metric("mean_unit_residual", d.mean_unit_residual.clone());
    outcome.metric("mean_orthogonality", d.mean_orthogonality);
    outcome.metric("max_alignment", d.max_alignment);
    outcome.metric("iterations", result.iterations);
    outcome.metric("flagged", result.flagged);
    let mut msg = format!(
        "final loss {:.3e} after {} iterations; unit residual {:?}, orthogonality {:.3e}",
        result.final_loss.total, result.iterations, d.mean_unit_residual, d.mean_orthogonality
    );
    if d.degenerate {
        msg.push_str(&format!(
            "\nwarning: fitted gradients become nearly parallel (normalised ⟨∇y_i,∇y_j⟩² up to {:.3e} near {:?}); \
             the fit is unreliable on this patch",
            d.max_alignment, d.worst_node
        ));
    }
    if !d.targets_met {
        msg.push_str("\nwarning: residual targets not met");
    }
    if result.flagged {
        outcome.exit_code = 3;
    }
    outcome.message = Some(msg);
    Ok(outcome)
}
