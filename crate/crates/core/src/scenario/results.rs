//! Run outputs: the per-episode CSV log and the run manifest.
//!
//! Episode log columns, one row per episode:
//!
//! ```text
//! episode,reward,q_hat,ape,price_mg_1..N,pcc_kw_mg_1..N,p_w_kw,welfare
//! ```
//!
//! Prices ($/kWh), PCC exchange and wholesale exchange (kW) are means over
//! the decision window. Reward and welfare are in $. Floats are written in
//! shortest round-trip form, so reading a log back is exact.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_schema, read_text, write_text, ExperimentConfig, OverrideEvent, ScenarioError, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLogRow {
    pub episode: usize,
    pub reward: f64,
    pub q_hat: f64,
    pub ape: f64,
    pub price_mg: Vec<f64>,
    pub pcc_kw_mg: Vec<f64>,
    pub p_w_kw: f64,
    pub welfare: f64,
}

pub fn episode_log_header(n_mgs: usize) -> String {
    let mut h = String::from("episode,reward,q_hat,ape");
    for k in 1..=n_mgs {
        let _ = write!(h, ",price_mg_{k}");
    }
    for k in 1..=n_mgs {
        let _ = write!(h, ",pcc_kw_mg_{k}");
    }
    h.push_str(",p_w_kw,welfare");
    h
}

pub fn episode_log_to_string(rows: &[EpisodeLogRow], n_mgs: usize) -> Result<String, ScenarioError> {
    let mut s = episode_log_header(n_mgs);
    s.push('\n');
    for r in rows {
        if r.price_mg.len() != n_mgs || r.pcc_kw_mg.len() != n_mgs {
            return Err(ScenarioError::Validation(format!(
                "episode {}: row does not have {n_mgs} microgrids",
                r.episode
            )));
        }
        let _ = write!(s, "{},{},{},{}", r.episode, r.reward, r.q_hat, r.ape);
        for v in r.price_mg.iter().chain(&r.pcc_kw_mg) {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{},{}", r.p_w_kw, r.welfare);
    }
    Ok(s)
}

pub fn parse_episode_log(text: &str, origin: &str) -> Result<(usize, Vec<EpisodeLogRow>), ScenarioError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (n, head) = lines.next().ok_or_else(|| ScenarioError::parse(origin, "missing header"))?;
    let cols = head.split(',').count();
    if cols < 8 || (cols - 6) % 2 != 0 {
        return Err(ScenarioError::parse_line(origin, n, "unexpected column count"));
    }
    let n_mgs = (cols - 6) / 2;
    if head != episode_log_header(n_mgs) {
        return Err(ScenarioError::parse_line(origin, n, format!("header must be `{}`", episode_log_header(n_mgs))));
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols {
            return Err(ScenarioError::parse_line(origin, n, format!("{} cells, expected {cols}", cells.len())));
        }
        let num = |k: usize| -> Result<f64, ScenarioError> {
            cells[k]
                .parse()
                .map_err(|_| ScenarioError::parse_line(origin, n, format!("`{}` is not a number", cells[k])))
        };
        let episode = cells[0]
            .parse()
            .map_err(|_| ScenarioError::parse_line(origin, n, format!("episode `{}` is not an index", cells[0])))?;
        rows.push(EpisodeLogRow {
            episode,
            reward: num(1)?,
            q_hat: num(2)?,
            ape: num(3)?,
            price_mg: (0..n_mgs).map(|k| num(4 + k)).collect::<Result<_, _>>()?,
            pcc_kw_mg: (0..n_mgs).map(|k| num(4 + n_mgs + k)).collect::<Result<_, _>>()?,
            p_w_kw: num(4 + 2 * n_mgs)?,
            welfare: num(5 + 2 * n_mgs)?,
        });
    }
    Ok((n_mgs, rows))
}

pub fn save_episode_log(rows: &[EpisodeLogRow], n_mgs: usize, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    write_text(path.as_ref(), &episode_log_to_string(rows, n_mgs)?)
}

pub fn load_episode_log(path: impl AsRef<Path>) -> Result<(usize, Vec<EpisodeLogRow>), ScenarioError> {
    let path = path.as_ref();
    parse_episode_log(&read_text(path)?, &path.display().to_string())
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of `config`.
    pub config_sha256: String,
    /// Effective configuration, overrides applied.
    pub config: String,
    #[serde(default)]
    pub events: Vec<OverrideEvent>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, outputs: Vec<String>) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            seed: cfg.seed,
            config_sha256: cfg.hash(),
            config: cfg.to_toml(),
            events: cfg.scenario.events.clone(),
            outputs,
        }
    }
}

pub fn save_manifest(m: &RunManifest, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let text = toml::to_string(m).map_err(|e| ScenarioError::Validation(e.to_string()))?;
    write_text(path.as_ref(), &text)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<RunManifest, ScenarioError> {
    let path = path.as_ref();
    let m: RunManifest =
        toml::from_str(&read_text(path)?).map_err(|e| ScenarioError::parse(path.display(), e.to_string()))?;
    check_schema(m.schema_version)?;
    Ok(m)
}

/// Persists an episode log and its manifest into `dir`.
pub fn persist_results(
    rows: &[EpisodeLogRow],
    n_mgs: usize,
    cfg: &ExperimentConfig,
    command: &str,
    dir: impl AsRef<Path>,
) -> Result<RunManifest, ScenarioError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| ScenarioError::Io { path: dir.to_owned(), source })?;
    save_episode_log(rows, n_mgs, dir.join("episodes.csv"))?;
    let manifest = RunManifest::new(command, cfg, vec!["episodes.csv".into()]);
    save_manifest(&manifest, dir.join("manifest.toml"))?;
    Ok(manifest)
}
