//! Outputs are staged in memory and only land on disk once the whole command
//! has succeeded: each file goes to a temporary name first and is renamed
//! into place, so a failed run never leaves partial files behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Staged {
    files: Vec<(String, Vec<u8>)>,
    pub warnings: Vec<String>,
}

impl Staged {
    pub fn new() -> Self {
        Self {
            files: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }

    /// Writes every staged file plus `manifest.json` and `config.resolved.toml`.
    pub fn commit(
        mut self,
        dir: &Path,
        command: &str,
        config: &RunConfig,
    ) -> Result<Vec<PathBuf>, CliError> {
        let outputs: Vec<Value> = self
            .files
            .iter()
            .map(|(name, bytes)| json!({ "file": name, "bytes": bytes.len() }))
            .collect();
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": config.seed,
            "units": { "frequencies": "Hz in config, rad/s in CSV", "S_phi": "rad^2 s, two-sided" },
            "config": config,
            "outputs": outputs,
            "warnings": self.warnings,
        });
        self.add("config.resolved.toml", config.to_toml().into_bytes());
        self.add_json("manifest.json", &manifest);

        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, bytes).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, dest) in staged {
            fs::rename(&tmp, &dest)
                .map_err(|e| CliError::Io(format!("{}: {e}", dest.display())))?;
            written.push(dest);
        }
        Ok(written)
    }
}
