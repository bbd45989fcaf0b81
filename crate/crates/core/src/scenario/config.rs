//! Experiment configuration.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//!
//! [scenario]
//! feeder = "feeder33.toml"          # paths are relative to this file
//! feeder_load_scale = 0.0           # multiplier on the feeder's own bus demand
//! profile = "profile_day96.csv"     # or a [scenario.synthetic] table
//! flat_wholesale_price = 0.05       # optional: replaces the profile's price column
//!
//! [[scenario.microgrid]]
//! assets = "desk_mg1.toml"
//! pcc_bus = 18
//!
//! [[scenario.event]]                # optional parameter overrides
//! episode = 250
//! parameter = "fuel_price_scale"
//! value = 2.0
//!
//! [agent]
//! gamma = 0.99
//! step_size = 0.01
//! mu = 1e-5
//! phi = 0.01
//! epsilon = 0.1
//! delta_init = 1000.0
//! price_min = 0.28                  # $/kWh
//! price_max = 0.32
//! window_steps = 4
//! learning = "rls"                  # or "sgd"
//!
//! [estimation]
//! e_pv = 0.02                       # agent's irradiance error (normalized)
//! e_d_kw = 5.0                      # agent's load error (kW)
//! mg_forecast_rel = 0.02            # relative sd of each MG's own forecast
//!
//! [training]
//! episodes = 500
//! theta_threshold = 1e-4            # stop when ‖Δθ‖∞ falls below
//! window_start = 0
//! window_stride = 1                 # steps the window advances per episode
//!
//! [fixed_point]
//! v_threshold = 1e-4
//! max_iterations = 20
//! initial_voltage = 1.0
//!
//! [dispatch]
//! feas_tol = 1e-4
//! slp_tol = 1e-5
//! max_outer = 50
//! terminal_soc = true
//!
//! [oracle]
//! grid_points = 6
//! max_evaluations = 1000000
//! window_start = 0
//! ```
//!
//! Every section and field other than `scenario` has a default. Unknown
//! keys are rejected.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_schema, read_text, write_text, OverrideEvent, ScenarioError, SyntheticSpec};
use crate::rl::{Hyperparameters, PriceBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearningRule {
    Rls,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrogridEntry {
    pub assets: String,
    pub pcc_bus: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub feeder: String,
    #[serde(default)]
    pub feeder_load_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat_wholesale_price: Option<f64>,
    #[serde(rename = "microgrid")]
    pub microgrids: Vec<MicrogridEntry>,
    #[serde(rename = "event", default)]
    pub events: Vec<OverrideEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub gamma: f64,
    pub step_size: f64,
    pub mu: f64,
    pub phi: f64,
    pub epsilon: f64,
    pub delta_init: f64,
    pub price_min: f64,
    pub price_max: f64,
    pub window_steps: usize,
    pub learning: LearningRule,
}

impl Default for AgentSection {
    fn default() -> Self {
        let h = Hyperparameters::default();
        AgentSection {
            gamma: h.gamma,
            step_size: h.step_size,
            mu: h.mu,
            phi: h.phi,
            epsilon: h.epsilon,
            delta_init: 1e3,
            price_min: 0.28,
            price_max: 0.32,
            window_steps: 4,
            learning: LearningRule::Rls,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationSection {
    pub e_pv: f64,
    pub e_d_kw: f64,
    pub mg_forecast_rel: f64,
}

impl Default for EstimationSection {
    fn default() -> Self {
        EstimationSection { e_pv: 0.02, e_d_kw: 5.0, mg_forecast_rel: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub episodes: usize,
    pub theta_threshold: f64,
    pub window_start: usize,
    pub window_stride: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection { episodes: 500, theta_threshold: 1e-4, window_start: 0, window_stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointSection {
    pub v_threshold: f64,
    pub max_iterations: usize,
    pub initial_voltage: f64,
}

impl Default for FixedPointSection {
    fn default() -> Self {
        FixedPointSection { v_threshold: 1e-4, max_iterations: 20, initial_voltage: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispatchSection {
    pub feas_tol: f64,
    pub slp_tol: f64,
    pub max_outer: usize,
    pub terminal_soc: bool,
}

impl Default for DispatchSection {
    fn default() -> Self {
        DispatchSection { feas_tol: 1e-4, slp_tol: 1e-5, max_outer: 50, terminal_soc: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub grid_points: usize,
    pub max_evaluations: u64,
    pub window_start: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection { grid_points: 6, max_evaluations: 1_000_000, window_start: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub estimation: EstimationSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub fixed_point: FixedPointSection,
    #[serde(default)]
    pub dispatch: DispatchSection,
    #[serde(default)]
    pub oracle: OracleSection,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn check(ok: bool, what: impl Display) -> Result<(), ScenarioError> {
    if ok {
        Ok(())
    } else {
        Err(ScenarioError::Validation(what.to_string()))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        check_schema(self.schema_version)?;
        let s = &self.scenario;
        check(s.profile.is_some() != s.synthetic.is_some(), "scenario needs exactly one of `profile` or `synthetic`")?;
        check(!s.microgrids.is_empty(), "scenario needs at least one [[scenario.microgrid]]")?;
        check(
            s.feeder_load_scale >= 0.0 && s.feeder_load_scale.is_finite(),
            "scenario.feeder_load_scale must be >= 0",
        )?;
        if let Some(p) = s.flat_wholesale_price {
            check(p >= 0.0 && p.is_finite(), "scenario.flat_wholesale_price must be >= 0")?;
        }
        for (k, mg) in s.microgrids.iter().enumerate() {
            let dup = s.microgrids[..k].iter().any(|o| o.pcc_bus == mg.pcc_bus);
            check(!dup, format!("two microgrids share PCC bus {}", mg.pcc_bus))?;
        }
        for e in &s.events {
            e.validate()?;
            check(
                e.episode < self.training.episodes,
                format!("event at episode {} lies beyond the {} training episodes", e.episode, self.training.episodes),
            )?;
        }

        let a = &self.agent;
        check((0.0..=1.0).contains(&a.gamma), "agent.gamma must lie in [0, 1]")?;
        check(a.step_size > 0.0 && a.step_size.is_finite(), "agent.step_size must be > 0")?;
        check(a.mu >= 0.0 && a.mu.is_finite(), "agent.mu must be >= 0")?;
        check((0.0..1.0).contains(&a.phi), "agent.phi must lie in [0, 1)")?;
        check((0.0..=1.0).contains(&a.epsilon), "agent.epsilon must lie in [0, 1]")?;
        check(a.delta_init > 0.0 && a.delta_init.is_finite(), "agent.delta_init must be > 0")?;
        check(
            a.price_min.is_finite() && a.price_max.is_finite() && a.price_min < a.price_max,
            "agent.price_min must be below agent.price_max",
        )?;
        check(a.window_steps >= 1, "agent.window_steps must be >= 1")?;

        let e = &self.estimation;
        for (name, v) in [("e_pv", e.e_pv), ("e_d_kw", e.e_d_kw), ("mg_forecast_rel", e.mg_forecast_rel)] {
            check(v >= 0.0 && v.is_finite(), format!("estimation.{name} must be >= 0"))?;
        }

        let t = &self.training;
        check(t.episodes >= 1, "training.episodes must be >= 1")?;
        check(
            t.theta_threshold >= 0.0,
            "training.theta_threshold must be >= 0 (0 never stops early, inf stops after one episode)",
        )?;

        let f = &self.fixed_point;
        check(f.v_threshold > 0.0 && f.v_threshold.is_finite(), "fixed_point.v_threshold must be > 0")?;
        check(f.max_iterations >= 1, "fixed_point.max_iterations must be >= 1")?;
        check(
            f.initial_voltage > 0.5 && f.initial_voltage < 1.5,
            "fixed_point.initial_voltage must lie in (0.5, 1.5)",
        )?;

        let d = &self.dispatch;
        check(d.feas_tol > 0.0 && d.slp_tol > 0.0, "dispatch tolerances must be > 0")?;
        check(d.max_outer >= 1, "dispatch.max_outer must be >= 1")?;

        check(self.oracle.grid_points >= 1, "oracle.grid_points must be >= 1")?;
        check(self.oracle.max_evaluations >= 1, "oracle.max_evaluations must be >= 1")?;
        Ok(())
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        let a = &self.agent;
        Hyperparameters { gamma: a.gamma, step_size: a.step_size, mu: a.mu, phi: a.phi, epsilon: a.epsilon }
    }

    pub fn price_bounds(&self) -> PriceBounds {
        PriceBounds { min: self.agent.price_min, max: self.agent.price_max }
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    /// Canonical TOML form of the effective configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 of [`Self::to_toml`], lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses `value` as a TOML literal, falling back to a bare string.
fn parse_literal(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_owned()))
}

/// Applies a `section.key=value` override to a parsed config document.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), ScenarioError> {
    let (path, value) = assignment
        .split_once('=')
        .ok_or_else(|| ScenarioError::Validation(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ScenarioError::Validation(format!("override key `{}` is malformed", path.trim())));
    }
    let mut table = doc;
    for k in &keys[..keys.len() - 1] {
        let entry = table.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| {
            ScenarioError::Validation(format!("override key `{}`: `{k}` is not a section", path.trim()))
        })?;
    }
    table.insert(keys[keys.len() - 1].to_owned(), parse_literal(value.trim()));
    Ok(())
}

/// Parses config text with overrides applied in order, then validates.
pub fn parse_config(text: &str, base_dir: &Path, overrides: &[String]) -> Result<ExperimentConfig, ScenarioError> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| ScenarioError::parse("<config>", e.to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let mut cfg: ExperimentConfig =
        toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| ScenarioError::Validation(e.to_string()))?;
    cfg.base_dir = base_dir.to_owned();
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>, overrides: &[String]) -> Result<ExperimentConfig, ScenarioError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, dir, overrides).map_err(|e| match e {
        ScenarioError::Parse { line, msg, .. } => {
            ScenarioError::Parse { origin: path.display().to_string(), line, msg }
        }
        other => other,
    })
}

pub fn save_config(cfg: &ExperimentConfig, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    write_text(path.as_ref(), &cfg.to_toml())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::bundled;

    fn default_cfg(overrides: &[&str]) -> Result<ExperimentConfig, ScenarioError> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        load_config(bundled("default_config.toml"), &o)
    }

    #[test]
    fn bundled_default_matches_built_in_defaults() {
        let cfg = default_cfg(&[]).unwrap();
        assert_eq!(cfg.agent, AgentSection::default());
        assert_eq!(cfg.hyperparameters(), Hyperparameters::default());
        assert_eq!(cfg.scenario.microgrids.len(), 2);
    }

    #[test]
    fn overrides_are_typed_and_applied() {
        let cfg = default_cfg(&["agent.phi=0.1", "training.episodes = 12", "seed=99"]).unwrap();
        assert_eq!(cfg.agent.phi, 0.1);
        assert_eq!(cfg.training.episodes, 12);
        assert_eq!(cfg.seed, 99);
        let err = default_cfg(&["agent.phi=fast"]).unwrap_err();
        assert!(err.to_string().contains("invalid type"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = default_cfg(&["agent.lambda=0.3"]).unwrap_err();
        assert!(err.to_string().contains("lambda"), "{err}");
        let err = default_cfg(&["bogus.x=1"]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for o in ["agent.phi=1.0", "agent.price_min=0.5", "fixed_point.v_threshold=0", "training.episodes=0"] {
            assert!(matches!(default_cfg(&[o]), Err(ScenarioError::Validation(_))), "{o}");
        }
    }

    #[test]
    fn infinite_threshold_is_allowed() {
        assert!(default_cfg(&["training.theta_threshold=inf"]).unwrap().training.theta_threshold.is_infinite());
    }

    #[test]
    fn hash_tracks_effective_values_and_round_trips() {
        let a = default_cfg(&[]).unwrap();
        let b = default_cfg(&["agent.epsilon=0.2"]).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        save_config(&a, &path).unwrap();
        let mut back = load_config(&path, &[]).unwrap();
        back.base_dir = a.base_dir.clone();
        assert_eq!(back, a);
        assert_eq!(back.hash(), a.hash());
    }
}
