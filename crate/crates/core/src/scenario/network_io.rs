//! Network description files.
//!
//! ```toml
//! schema_version = 1
//! name = "feeder-33"
//! base_kva = 10000.0      # three-phase base power, kVA
//! base_kv = 12.66         # line-to-line base voltage, kV
//!
//! [[bus]]
//! id = 1
//! kind = "slack"          # "slack" | "pq"
//! v_min = 0.9             # pu
//! v_max = 1.1             # pu
//! p_load_kw = 0.0         # optional nominal demand
//! q_load_kvar = 0.0
//!
//! [[branch]]
//! from = 1
//! to = 2
//! r = 0.00575             # series resistance, pu
//! x = 0.00293             # series reactance, pu
//! limit = 1.0             # apparent power limit, pu
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_schema, read_text, write_text, ScenarioError, SCHEMA_VERSION};
use crate::grid::{Branch, Bus, NetworkModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub schema_version: u32,
    pub name: String,
    pub base_kva: f64,
    pub base_kv: f64,
    #[serde(rename = "bus")]
    pub buses: Vec<Bus>,
    #[serde(rename = "branch", default)]
    pub branches: Vec<Branch>,
}

impl NetworkFile {
    pub fn into_model(self) -> Result<NetworkModel, ScenarioError> {
        check_schema(self.schema_version)?;
        Ok(NetworkModel::new(self.name, self.base_kva, self.base_kv, self.buses, self.branches)?)
    }

    pub fn from_model(net: &NetworkModel) -> Self {
        NetworkFile {
            schema_version: SCHEMA_VERSION,
            name: net.name.clone(),
            base_kva: net.base_kva,
            base_kv: net.base_kv,
            buses: net.buses.clone(),
            branches: net.branches.clone(),
        }
    }
}

pub fn parse_network(text: &str) -> Result<NetworkModel, ScenarioError> {
    let file: NetworkFile = toml::from_str(text).map_err(|e| ScenarioError::parse("<network>", e.to_string()))?;
    file.into_model()
}

pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkModel, ScenarioError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let file: NetworkFile = toml::from_str(&text).map_err(|e| ScenarioError::parse(path.display(), e.to_string()))?;
    file.into_model()
}

pub fn save_network(net: &NetworkModel, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let text = toml::to_string(&NetworkFile::from_model(net)).map_err(|e| ScenarioError::Validation(e.to_string()))?;
    write_text(path.as_ref(), &text)
}
