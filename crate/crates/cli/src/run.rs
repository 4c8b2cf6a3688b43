//! Shared plumbing: the dry-run plan and the one run manifest every
//! artifact-producing command writes.

use std::path::{Path, PathBuf};

use serde::Serialize;

use distill_core::manifest::RunManifest;

use crate::config::StudyConfig;
use crate::error::{require, CliError};

pub struct Ctx {
    pub config: StudyConfig,
    pub argv: Vec<String>,
    pub dry_run: bool,
}

/// What a command will read and write.
#[derive(Debug, Serialize)]
pub struct Plan {
    pub command: String,
    /// `(description, path)` of every upstream artifact.
    pub inputs: Vec<(String, PathBuf)>,
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub settings: serde_json::Value,
}

/// `<file>.manifest.json` next to a file output, `run.manifest.json` inside a
/// directory output.
pub fn manifest_path(primary: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        primary.join("run.manifest.json")
    } else {
        let mut name = primary.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        primary.with_file_name(name)
    }
}

impl Plan {
    pub fn new(command: &str, settings: serde_json::Value) -> Self {
        Plan { command: command.into(), inputs: Vec::new(), outputs: Vec::new(), manifest: PathBuf::new(), settings }
    }

    pub fn input(mut self, what: &str, path: &Path) -> Self {
        self.inputs.push((what.into(), path.to_path_buf()));
        self
    }

    pub fn output_file(mut self, path: &Path) -> Self {
        if self.outputs.is_empty() {
            self.manifest = manifest_path(path, false);
        }
        self.outputs.push(path.to_path_buf());
        self
    }

    pub fn output_dir(mut self, path: &Path) -> Self {
        if self.outputs.is_empty() {
            self.manifest = manifest_path(path, true);
        }
        self.outputs.push(path.to_path_buf());
        self
    }
}

impl Ctx {
    /// Checks inputs, then either prints the plan (dry run) or runs `body`
    /// and records a manifest with the outputs it reports. A failing body
    /// still leaves a manifest carrying its exit code. Plans without outputs
    /// produce no manifest.
    pub fn execute<F>(&self, plan: Plan, body: F) -> Result<(), CliError>
    where
        F: FnOnce() -> Result<Vec<PathBuf>, CliError>,
    {
        for (what, path) in &plan.inputs {
            require(path, what)?;
        }
        if self.dry_run {
            println!("{}", serde_json::to_string_pretty(&plan).expect("plan serializes"));
            return Ok(());
        }
        if plan.outputs.is_empty() {
            return body().map(|_| ());
        }
        let config = serde_json::json!({ "study": self.config, "command": plan.settings });
        let inputs: Vec<&Path> = plan.inputs.iter().map(|(_, p)| p.as_path()).filter(|p| p.is_file()).collect();
        let mut manifest = RunManifest::start(self.argv.clone(), config, &inputs).map_err(CliError::runtime)?;
        let result = body();
        let (outputs, code) = match &result {
            Ok(outputs) => (outputs.clone(), 0),
            Err(e) => (Vec::new(), e.exit_code()),
        };
        manifest.finish(outputs, code);
        manifest.write(&plan.manifest).map_err(|e| CliError::Runtime(format!("{}: {e}", plan.manifest.display())))?;
        tracing::info!(manifest = %plan.manifest.display(), run_id = %manifest.run_id, "wrote run manifest");
        result.map(|_| ())
    }
}
