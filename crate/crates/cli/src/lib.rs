//! `flowbox` command line: charts, eigenfunction checks, variational fits and
//! cross-validation of the closed-form examples.

pub mod cmd;
pub mod error;
pub mod grid;
pub mod manifest;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

use cmd::chart::ChartArgs;
use cmd::kef::KefArgs;
use cmd::orbit::OrbitArgs;
use cmd::replay::ReplayArgs;
use cmd::varfit::VarfitArgs;
use cmd::verify::VerifyArgs;
use cmd::RunConfig;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "flowbox", version, about = "Flowbox coordinates and Koopman eigenfunctions from characteristics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Built-in systems.
    Systems {
        #[command(subcommand)]
        action: SystemsAction,
    },
    /// Characteristics charts.
    Chart {
        #[command(subcommand)]
        action: ChartAction,
    },
    /// Eigenfunction PDE residuals.
    Kef {
        #[command(subcommand)]
        action: KefAction,
    },
    /// Fit unit-velocity coordinates with orthogonal gradients on a grid.
    Varfit(VarfitArgs),
    /// Integrate a single orbit.
    Orbit(OrbitArgs),
    /// Cross-check the closed forms against the PDE and the charts.
    Verify(VerifyArgs),
    /// Re-run a recorded manifest and compare the outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Subcommand)]
pub enum SystemsAction {
    List {
        #[arg(long, default_value = "")]
        filter: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum ChartAction {
    /// Evaluate `(h, m)` on a grid after auditing the surface.
    Build(ChartArgs),
}

#[derive(Debug, Subcommand)]
pub enum KefAction {
    /// Residual of `∇Φ·P = λΦ` over a grid.
    Check(KefArgs),
}

fn recorded(config: RunConfig, out: &std::path::Path) -> CliResult<i32> {
    let (manifest, outcome) = cmd::record(&config, out)?;
    if let Some(msg) = &outcome.message {
        if outcome.exit_code == 0 {
            println!("{msg}");
        } else {
            eprintln!("{msg}");
        }
    }
    println!("wrote {} files and {}", manifest.outputs.len(), out.join(manifest::MANIFEST_FILE).display());
    Ok(outcome.exit_code)
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Systems {
            action: SystemsAction::List { filter },
        } => {
            print!("{}", cmd::systems::table(&filter));
            Ok(0)
        }
        Command::Chart {
            action: ChartAction::Build(a),
        } => recorded(RunConfig::ChartBuild(a.to_config()?), &a.out),
        Command::Kef {
            action: KefAction::Check(a),
        } => recorded(RunConfig::KefCheck(a.to_config()?), &a.out),
        Command::Varfit(a) => recorded(RunConfig::Varfit(a.to_config()?), &a.out),
        Command::Orbit(a) => recorded(RunConfig::Orbit(a.to_config()?), &a.out),
        Command::Verify(a) => recorded(RunConfig::Verify(a.to_config()), &a.out),
        Command::Replay(a) => {
            let report = cmd::replay::replay(&a.manifest, a.out.as_deref())?;
            for (path, same) in &report.files {
                println!("{} {path}", if *same { "identical" } else { "DIFFERS  " });
            }
            Ok(if report.identical() { 0 } else { 2 })
        }
    }
}

/// Parses `args` (program name first) and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            e.exit_code()
        }
    }
}


impl From<grid::GridParseError> for CliError {
    fn from(e: grid::GridParseError) -> Self {
        CliError::Usage(e.to_string())
    }
}
