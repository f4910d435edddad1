use std::path::{Path, PathBuf};

use clap::Args;

use super::record;
use crate::error::CliResult;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Where to write the new outputs; defaults to `replay/` next to the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ReplayReport {
    pub manifest: RunManifest,
    /// `(path, identical)` for every output of the original run.
    pub files: Vec<(String, bool)>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.files.iter().all(|(_, same)| *same)
    }
}

pub fn replay(manifest_path: &Path, out: Option<&Path>) -> CliResult<ReplayReport> {
    let original = RunManifest::read(manifest_path)?;
    let out = match out {
        Some(o) => o.to_path_buf(),
        None => manifest_path.parent().unwrap_or(Path::new(".")).join("replay"),
    };
    let (manifest, _) = record(&original.config, &out)?;
    let files = original
        .outputs
        .iter()
        .map(|o| {
            let same = manifest.outputs.iter().any(|n| n.path == o.path && n.sha256 == o.sha256);
            (o.path.clone(), same)
        })
        .collect();
    Ok(ReplayReport { manifest, files })
}
