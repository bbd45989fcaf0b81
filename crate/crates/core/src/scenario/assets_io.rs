//! Microgrid asset files.
//!
//! ```toml
//! schema_version = 1
//! name = "mg-1"
//! network = "mg13_network.toml"   # path relative to this file, or an inline table
//!
//! [pcc]
//! p_max_kw = 1500.0
//! q_max_kvar = 1000.0
//!
//! [[dg]]
//! bus = 671
//! p_max_kw = 500.0
//! q_max_kvar = 300.0
//! ramp_kw = 200.0
//! a_f = 0.0001773
//! b_f = 0.1709
//! c_f = 14.67
//! fuel_price = 1.0
//!
//! [[storage]]
//! bus = 675
//! capacity_kwh = 500.0
//! soc_min = 0.1
//! soc_max = 0.9
//! p_ch_max_kw = 200.0
//! p_dis_max_kw = 200.0
//! eta_ch = 0.95
//! eta_dis = 0.95
//! q_max_kvar = 100.0
//!
//! [[pv]]
//! bus = 634
//! rated_kw = 300.0
//! q_max_kvar = 100.0
//!
//! [[load]]
//! bus = 671
//! share = 1.0
//! q_per_p = 0.3
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_schema, load_network, read_text, write_text, NetworkFile, ScenarioError, SCHEMA_VERSION};
use crate::dispatch::{DieselGenerator, LoadShare, MgAssets, PccLimits, PvUnit, Storage};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSource {
    Path(String),
    Inline(NetworkFile),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetsFile {
    pub schema_version: u32,
    pub name: String,
    pub network: NetworkSource,
    pub pcc: PccLimits,
    #[serde(rename = "dg", default)]
    pub dgs: Vec<DieselGenerator>,
    #[serde(default)]
    pub storage: Vec<Storage>,
    #[serde(default)]
    pub pv: Vec<PvUnit>,
    #[serde(rename = "load", default)]
    pub loads: Vec<LoadShare>,
}

impl AssetsFile {
    /// Resolves the network (relative paths against `dir`) and validates.
    pub fn into_assets(self, dir: &Path) -> Result<MgAssets, ScenarioError> {
        check_schema(self.schema_version)?;
        let network = match self.network {
            NetworkSource::Path(p) => load_network(dir.join(p))?,
            NetworkSource::Inline(f) => f.into_model()?,
        };
        MgAssets::new(self.name, network, self.dgs, self.storage, self.pv, self.loads, self.pcc)
            .map_err(|e| ScenarioError::Validation(e.to_string()))
    }

    /// File form with the network written inline.
    pub fn from_assets(a: &MgAssets) -> Self {
        AssetsFile {
            schema_version: SCHEMA_VERSION,
            name: a.name.clone(),
            network: NetworkSource::Inline(NetworkFile::from_model(&a.network)),
            pcc: a.pcc,
            dgs: a.dgs.clone(),
            storage: a.storage.clone(),
            pv: a.pv.clone(),
            loads: a.loads.clone(),
        }
    }
}

/// Parses an asset file; a network path is resolved against `dir`.
pub fn parse_assets(text: &str, dir: &Path) -> Result<MgAssets, ScenarioError> {
    let file: AssetsFile = toml::from_str(text).map_err(|e| ScenarioError::parse("<assets>", e.to_string()))?;
    file.into_assets(dir)
}

pub fn load_assets(path: impl AsRef<Path>) -> Result<MgAssets, ScenarioError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let file: AssetsFile = toml::from_str(&text).map_err(|e| ScenarioError::parse(path.display(), e.to_string()))?;
    file.into_assets(path.parent().unwrap_or(Path::new(".")))
}

pub fn save_assets(assets: &MgAssets, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let text =
        toml::to_string(&AssetsFile::from_assets(assets)).map_err(|e| ScenarioError::Validation(e.to_string()))?;
    write_text(path.as_ref(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::bundled;

    #[test]
    fn bundled_mg13_assets_load() {
        let a = load_assets(bundled("mg13_assets.toml")).unwrap();
        assert_eq!(a.network.n_buses(), 13);
        assert_eq!(a.dgs.len(), 1);
        assert_eq!(a.storage.len(), 1);
    }

    #[test]
    fn round_trip_with_inline_network() {
        let a = load_assets(bundled("mg13_assets.toml")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.toml");
        save_assets(&a, &p).unwrap();
        assert_eq!(load_assets(&p).unwrap(), a);
    }

    #[test]
    fn load_at_unknown_bus_rejected() {
        let text = std::fs::read_to_string(bundled("mg13_assets.toml")).unwrap().replace("bus = 652", "bus = 999");
        let err = parse_assets(&text, &bundled(".")).unwrap_err();
        assert!(err.to_string().contains("999"), "{err}");
    }
}
