//! Scenario inputs and run outputs: networks, microgrid assets, profiles,
//! experiment configuration, episode logs and manifests.

mod assets_io;
mod config;
mod network_io;
mod profiles;
mod results;

pub use assets_io::{load_assets, parse_assets, save_assets, AssetsFile, NetworkSource};
pub use config::{
    apply_override, load_config, parse_config, save_config, AgentSection, DispatchSection, EstimationSection,
    ExperimentConfig, FixedPointSection, LearningRule, MicrogridEntry, OracleSection, ScenarioSection, TrainingSection,
};
pub use network_io::{load_network, parse_network, save_network, NetworkFile};
pub use profiles::{
    generate_synthetic, load_profiles, parse_profile, profile_to_string, save_profiles, OverrideEvent, ScenarioProfile,
    SyntheticSpec, OVERRIDE_PARAMETERS,
};
pub use results::{
    episode_log_header, episode_log_to_string, load_episode_log, load_manifest, parse_episode_log, persist_results,
    save_episode_log, save_manifest, EpisodeLogRow, RunManifest,
};

use std::fmt::Display;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid::GridError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}{}: {msg}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Parse { origin: String, line: Option<usize>, msg: String },
    #[error("unsupported schema_version {found} (expected {expected})")]
    Schema { expected: u32, found: u32 },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl ScenarioError {
    pub(crate) fn parse(origin: impl Display, msg: impl Into<String>) -> Self {
        ScenarioError::Parse { origin: origin.to_string(), line: None, msg: msg.into() }
    }

    pub(crate) fn parse_line(origin: impl Display, line: usize, msg: impl Into<String>) -> Self {
        ScenarioError::Parse { origin: origin.to_string(), line: Some(line), msg: msg.into() }
    }
}

pub(crate) fn check_schema(found: u32) -> Result<(), ScenarioError> {
    if found != SCHEMA_VERSION {
        return Err(ScenarioError::Schema { expected: SCHEMA_VERSION, found });
    }
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_owned(), source })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), ScenarioError> {
    std::fs::write(path, text).map_err(|source| ScenarioError::Io { path: path.to_owned(), source })
}

/// Directory holding the data files that ship with the crate.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Path of a bundled data file.
pub fn bundled(name: &str) -> PathBuf {
    bundled_dir().join(name)
}
