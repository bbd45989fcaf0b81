//! Small hand-built systems for the coordination tests.

use mgcoop::coordination::{Settings, System};
use mgcoop::dispatch::{DieselGenerator, LoadShare, MgAssets, PccLimits, PvUnit};
use mgcoop::grid::{Bus, BusKind, NetworkModel};
use mgcoop::rl::PriceBounds;
use mgcoop::scenario::{bundled, load_config, load_network, ScenarioProfile};

pub fn feeder33() -> NetworkModel {
    load_network(bundled("feeder33.toml")).unwrap()
}

/// One-bus microgrid; the DG has no reactive range and the load draws no
/// reactive power, so the PCC exchange is purely active.
pub fn one_bus_mg(name: &str, dg_kw: f64, pv_kw: f64) -> MgAssets {
    let bus = Bus { id: 1, kind: BusKind::Slack, v_min: 0.9, v_max: 1.1, p_load_kw: 0.0, q_load_kvar: 0.0 };
    let net = NetworkModel::new(name, 1000.0, 0.48, vec![bus], vec![]).unwrap();
    let dgs = if dg_kw > 0.0 { vec![DieselGenerator::with_reference_curve(1, dg_kw, 0.0, 1e4, 1.0)] } else { vec![] };
    let pv = if pv_kw > 0.0 { vec![PvUnit { bus: 1, rated_kw: pv_kw, q_max_kvar: 0.0 }] } else { vec![] };
    let pcc = PccLimits { p_max_kw: 5000.0, q_max_kvar: 5000.0 };
    MgAssets::new(name, net, dgs, vec![], pv, vec![LoadShare { bus: 1, share: 1.0, q_per_p: 0.0 }], pcc).unwrap()
}

pub fn flat_profile(n_mgs: usize, steps: usize, load_kw: f64, irradiance: f64, price: f64) -> ScenarioProfile {
    ScenarioProfile {
        dt_h: 0.25,
        wholesale_price: vec![price; steps],
        load_kw: vec![vec![load_kw; steps]; n_mgs],
        irradiance: vec![vec![irradiance; steps]; n_mgs],
        events: vec![],
    }
}

pub fn settings(steps: usize, bounds: (f64, f64)) -> Settings {
    Settings { window_steps: steps, bounds: PriceBounds { min: bounds.0, max: bounds.1 }, ..Settings::default() }
}

pub fn desk(overrides: &[&str]) -> (System, Settings) {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let cfg = load_config(bundled("desk_config.toml"), &o).unwrap();
    (System::from_config(&cfg).unwrap(), Settings::from_config(&cfg))
}
