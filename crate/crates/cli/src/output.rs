use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mgcoop::scenario::{save_manifest, ExperimentConfig, RunManifest};

use crate::error::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// The invocation as typed, for the manifest.
pub fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

/// Writes `manifest.toml` into `dir` listing `outputs`.
pub fn write_manifest(dir: &Path, cfg: &ExperimentConfig, outputs: &[&str]) -> Result<PathBuf, CliError> {
    let mut all: Vec<String> = outputs.iter().map(|s| s.to_string()).collect();
    all.push("manifest.toml".into());
    let manifest = RunManifest::new(&command_line(), cfg, all);
    let path = dir.join("manifest.toml");
    save_manifest(&manifest, &path)?;
    Ok(path)
}

/// A CSV table built row by row; floats use the shortest round-trip form.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        Csv { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn cell(x: f64) -> String {
    format!("{x:?}")
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
