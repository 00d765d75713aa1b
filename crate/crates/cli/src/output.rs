use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.toml";

/// Files produced by a command, held in memory until the command has
/// finished so that a failed run leaves nothing behind.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Writes every artifact and the manifest into `dir`.
    pub fn write(&self, dir: &Path, command: &str, config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
        let io = |path: &Path, e: std::io::Error| CliError::Input(format!("{}: {e}", path.display()));
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for (name, contents) in &self.files {
            let path = dir.join(name);
            relu_ntk::render::write_file(&path, contents)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
        let manifest = Manifest {
            command,
            seed: config.seed,
            versions: Versions {
                relu_ntk: relu_ntk::VERSION,
                relu_ntk_cli: env!("CARGO_PKG_VERSION"),
            },
            artifacts: self.names(),
            config,
        };
        let text = toml::to_string(&manifest).expect("manifest serializes");
        let path = dir.join(MANIFEST);
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

#[derive(Serialize)]
struct Versions {
    #[serde(rename = "relu-ntk")]
    relu_ntk: &'static str,
    #[serde(rename = "relu-ntk-cli")]
    relu_ntk_cli: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    artifacts: Vec<String>,
    versions: Versions,
    config: &'a ExperimentConfig,
}
