pub mod chart;
pub mod kef;
pub mod orbit;
pub mod replay;
pub mod systems;
pub mod varfit;
pub mod verify;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use flowbox_core::chart::SurfaceSpec;
use flowbox_core::dynsys::{builtin, builtin_info, SystemSpec};
use flowbox_core::varfit::PRNG_NAME;
use flowbox_core::{Complex64, VectorField};

use crate::error::{CliError, CliResult};
use crate::manifest::{config_hash, describe_outputs, unix_now, RunManifest};

/// A built-in system by name or an inline user system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SystemSpec>,
}

impl SystemRef {
    /// A registry name, or a path to a JSON system description.
    pub fn resolve(arg: &str) -> CliResult<SystemRef> {
        if builtin_info(arg).is_some() {
            return Ok(SystemRef {
                name: arg.to_string(),
                spec: None,
            });
        }
        let path = Path::new(arg);
        if path.is_file() {
            let text = fs::read_to_string(path)?;
            let spec: SystemSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("system file {arg}: {e}")))?;
            return Ok(SystemRef {
                name: spec.name.clone(),
                spec: Some(spec),
            });
        }
        Err(CliError::Usage(format!(
            "unknown system `{arg}` (not a built-in name or a JSON file); see `flowbox systems list`"
        )))
    }

    pub fn build(&self) -> CliResult<VectorField> {
        Ok(match &self.spec {
            Some(spec) => spec.build()?,
            None => builtin(&self.name)?,
        })
    }

    pub fn is_builtin(&self) -> bool {
        self.spec.is_none()
    }
}

/// Shorthand, inline JSON or a JSON file; the registry default when absent.
pub fn resolve_surface(arg: Option<&str>, system: &SystemRef) -> CliResult<SurfaceSpec> {
    match arg {
        None => {
            let default = if system.is_builtin() {
                SurfaceSpec::default_for(&system.name)
            } else {
                None
            };
            default.ok_or_else(|| CliError::Usage(format!("no default surface for `{}`; pass --surface", system.name)))
        }
        Some(text) if text.trim_start().starts_with('{') => Ok(SurfaceSpec::from_json(text)?),
        Some(text) if Path::new(text).is_file() => Ok(SurfaceSpec::from_json(&fs::read_to_string(text)?)?),
        Some(text) => Ok(SurfaceSpec::parse_shorthand(text)?),
    }
}

/// `RE`, `RE+IMi`, `RE-IMi` or `IMi`.
pub fn parse_lambda(text: &str) -> CliResult<Complex64> {
    let bad = || CliError::Usage(format!("cannot parse eigenvalue `{text}`, expected RE[+IMi]"));
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Complex64::new(num(&t)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (num(&body[..k])?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        s => num(s)?,
    };
    Ok(Complex64::new(re, im))
}

/// Thread pool capped by `FLOWBOX_THREADS` when set.
pub fn pool() -> CliResult<rayon::ThreadPool> {
    let threads = std::env::var("FLOWBOX_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))
}

pub fn write_output<F>(dir: &Path, name: &str, body: F) -> CliResult<PathBuf>
where
    F: FnOnce(&mut BufWriter<File>) -> CliResult<()>,
{
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    body(&mut w)?;
    w.flush()?;
    Ok(PathBuf::from(name))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    write_output(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

/// Resolved configuration of a recorded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    ChartBuild(chart::ChartConfig),
    KefCheck(kef::KefConfig),
    Varfit(varfit::VarfitConfig),
    Orbit(orbit::OrbitConfig),
    Verify(verify::VerifyConfig),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::ChartBuild(_) => "chart build",
            RunConfig::KefCheck(_) => "kef check",
            RunConfig::Varfit(_) => "varfit",
            RunConfig::Orbit(_) => "orbit",
            RunConfig::Verify(_) => "verify",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            RunConfig::Varfit(c) => Some(c.fit.seed),
            RunConfig::Verify(c) => Some(c.seed),
            _ => None,
        }
    }

    fn execute(&self, out: &Path) -> CliResult<Outcome> {
        match self {
            RunConfig::ChartBuild(c) => chart::execute(c, out),
            RunConfig::KefCheck(c) => kef::execute(c, out),
            RunConfig::Varfit(c) => varfit::execute(c, out),
            RunConfig::Orbit(c) => orbit::execute(c, out),
            RunConfig::Verify(c) => verify::execute(c, out),
        }
    }
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub metrics: Map<String, Value>,
    /// Non-zero when the run completed but a check failed.
    pub exit_code: i32,
    pub message: Option<String>,
}

impl Outcome {
    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_string(), value.into());
    }
}

/// Runs the command into `out` and writes the manifest next to its outputs.
pub fn record(config: &RunConfig, out: &Path) -> CliResult<(RunManifest, Outcome)> {
    fs::create_dir_all(out)?;
    let started = unix_now();
    let outcome = config.execute(out)?;
    let manifest = RunManifest {
        command: config.name().to_string(),
        config: config.clone(),
        config_sha256: config_hash(config)?,
        seed: config.seed(),
        prng: PRNG_NAME.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        exit_code: outcome.exit_code,
        outputs: describe_outputs(out, &outcome.outputs)?,
        metrics: outcome.metrics.clone(),
    };
    manifest.write(out)?;
    Ok((manifest, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_forms() {
        let c = |re, im| Complex64::new(re, im);
        assert_eq!(parse_lambda("3").unwrap(), c(3.0, 0.0));
        assert_eq!(parse_lambda("-0.45+0.2i").unwrap(), c(-0.45, 0.2));
        assert_eq!(parse_lambda("1-2i").unwrap(), c(1.0, -2.0));
        assert_eq!(parse_lambda("i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_lambda("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_lambda("2.5i").unwrap(), c(0.0, 2.5));
        assert_eq!(parse_lambda("1e-3-2e-1i").unwrap(), c(1e-3, -0.2));
        assert!(parse_lambda("1+").is_err());
        assert!(parse_lambda("abc").is_err());
    }
}
