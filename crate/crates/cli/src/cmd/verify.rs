use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use flowbox_core::refsol::ArgConvention;
use flowbox_core::verify::run_all;

use super::{write_json, Outcome};
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Substring of the system ids to include; empty selects all.
    #[serde(default)]
    pub filter: String,
    #[serde(default)]
    pub arg_convention: ArgConvention,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_points() -> usize {
    100
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    Standard,
    Swapped,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "")]
    pub filter: String,
    /// Angle convention of the rotation families; `swapped` must make the checks fail.
    #[arg(long, value_enum, default_value = "standard")]
    pub arg_convention: ConventionArg,
    /// Sample points per suite.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "flowbox-out")]
    pub out: PathBuf,
}

impl VerifyArgs {
    pub fn to_config(&self) -> VerifyConfig {
        VerifyConfig {
            filter: self.filter.clone(),
            arg_convention: match self.arg_convention {
                ConventionArg::Standard => ArgConvention::Standard,
                ConventionArg::Swapped => ArgConvention::Swapped,
            },
            points: self.points,
            seed: self.seed,
        }
    }
}

pub fn execute(cfg: &VerifyConfig, out: &Path) -> CliResult<Outcome> {
    let results = run_all(&cfg.filter, cfg.arg_convention, cfg.points, cfg.seed)?;
    let mut outcome = Outcome::default();
    outcome.outputs.push(write_json(out, "verify.json", &results)?);
    let failed = results.iter().filter(|r| !r.passed).count();
    let mut lines = vec![format!(
        "{:<6} {:<24} {:<14} {:>11} {:>8} {:>5}",
        "result", "suite", "system", "worst", "tol", "n"
    )];
    for r in &results {
        lines.push(format!(
            "{:<6} {:<24} {:<14} {:>11.3e} {:>8.0e} {:>5}",
            if r.passed { "PASS" } else { "FAIL" },
            r.suite,
            r.system,
            r.metric,
            r.tolerance,
            r.samples
        ));
    }
    lines.push(format!("{} suites, {failed} failed", results.len()));
    outcome.metric("suites", results.len());
    outcome.metric("failed", failed);
    if failed > 0 {
        outcome.exit_code = 2;
    }
    outcome.message = Some(lines.join("\n"));
    Ok(outcome)
}
