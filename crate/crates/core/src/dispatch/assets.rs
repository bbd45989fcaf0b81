use serde::{Deserialize, Serialize};

use super::DispatchError;
use crate::grid::NetworkModel;

/// A diesel generator with a quadratic fuel curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DieselGenerator {
    pub bus: u32,
    pub p_max_kw: f64,
    pub q_max_kvar: f64,
    /// Largest change of active output between consecutive steps (kW).
    pub ramp_kw: f64,
    /// Fuel curve `a_f P² + b_f P + c_f` in litres, `P` in kW.
    pub a_f: f64,
    pub b_f: f64,
    pub c_f: f64,
    /// $/L
    pub fuel_price: f64,
}

impl DieselGenerator {
    /// Generator with the reference fuel curve (0.0001773 L/kW², 0.1709 L/kW,
    /// 14.67 L).
    pub fn with_reference_curve(bus: u32, p_max_kw: f64, q_max_kvar: f64, ramp_kw: f64, fuel_price: f64) -> Self {
        DieselGenerator { bus, p_max_kw, q_max_kvar, ramp_kw, a_f: 0.0001773, b_f: 0.1709, c_f: 14.67, fuel_price }
    }

    /// Fuel burnt in one step at output `p_kw`, litres. `c_f` is included
    /// unconditionally; the idle convention is applied by the caller.
    pub fn fuel_l(&self, p_kw: f64) -> f64 {
        self.a_f * p_kw * p_kw + self.b_f * p_kw + self.c_f
    }

    /// `dF/dP` at `p_kw`, L/kW.
    pub fn marginal_fuel(&self, p_kw: f64) -> f64 {
        2.0 * self.a_f * p_kw + self.b_f
    }
}

/// Fuel consumption `a_f P² + b_f P + c_f` (litres) of `dg` at `p_kw ≥ 0`.
pub fn fuel_cost(dg: &DieselGenerator, p_kw: f64) -> Result<f64, DispatchError> {
    if !(p_kw >= 0.0) || !p_kw.is_finite() {
        return Err(DispatchError::Domain(format!("generator output {p_kw} kW must be finite and >= 0")));
    }
    Ok(dg.fuel_l(p_kw))
}

/// A battery energy storage system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Storage {
    pub bus: u32,
    pub capacity_kwh: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub p_ch_max_kw: f64,
    pub p_dis_max_kw: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    /// Reactive capability of the inverter (kvar). Zero pins `Q^ESS` at 0.
    #[serde(default)]
    pub q_max_kvar: f64,
}

/// State of charge after one step: `soc + Δt (P_ch η_ch − P_dis/η_dis)/E`.
pub fn soc_step(soc_prev: f64, p_ch_kw: f64, p_dis_kw: f64, ess: &Storage, dt_h: f64) -> f64 {
    soc_prev + dt_h * (p_ch_kw * ess.eta_ch - p_dis_kw / ess.eta_dis) / ess.capacity_kwh
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvUnit {
    pub bus: u32,
    /// Output at unit normalized irradiance (kW).
    pub rated_kw: f64,
    pub q_max_kvar: f64,
}

/// Fraction of the microgrid's aggregate demand connected at one bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadShare {
    pub bus: u32,
    pub share: f64,
    /// Reactive demand per unit active demand (kvar/kW).
    #[serde(default)]
    pub q_per_p: f64,
}

/// Exchange limits at the point of common coupling. Infinite values leave the
/// exchange unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PccLimits {
    pub p_max_kw: f64,
    pub q_max_kvar: f64,
}

/// Everything one microgrid owns. The slack bus of `network` is the PCC.
#[derive(Debug, Clone, PartialEq)]
pub struct MgAssets {
    pub name: String,
    pub network: NetworkModel,
    pub dgs: Vec<DieselGenerator>,
    pub storage: Vec<Storage>,
    pub pv: Vec<PvUnit>,
    pub loads: Vec<LoadShare>,
    pub pcc: PccLimits,
    // bus indices of each dg, storage, pv and load entry
    pub(crate) dg_bus: Vec<usize>,
    pub(crate) ess_bus: Vec<usize>,
    pub(crate) pv_bus: Vec<usize>,
    pub(crate) load_bus: Vec<usize>,
}

impl MgAssets {
    pub fn new(
        name: impl Into<String>,
        network: NetworkModel,
        dgs: Vec<DieselGenerator>,
        storage: Vec<Storage>,
        pv: Vec<PvUnit>,
        loads: Vec<LoadShare>,
        pcc: PccLimits,
    ) -> Result<Self, DispatchError> {
        let name = name.into();
        let resolve = |what: &str, bus: u32| {
            network.bus_index(bus).ok_or_else(|| DispatchError::Invalid(format!("{name}: {what} at unknown bus {bus}")))
        };
        let nonneg = |what: &str, v: f64| {
            if v >= 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(DispatchError::Invalid(format!("{name}: {what} must be >= 0, got {v}")))
            }
        };
        let mut dg_bus = Vec::new();
        for (k, g) in dgs.iter().enumerate() {
            dg_bus.push(resolve("generator", g.bus)?);
            for (w, v) in [
                ("p_max_kw", g.p_max_kw),
                ("q_max_kvar", g.q_max_kvar),
                ("ramp_kw", g.ramp_kw),
                ("a_f", g.a_f),
                ("b_f", g.b_f),
                ("c_f", g.c_f),
                ("fuel_price", g.fuel_price),
            ] {
                nonneg(&format!("generator {k} {w}"), v)?;
            }
            if !g.p_max_kw.is_finite() {
                return Err(DispatchError::Invalid(format!("{name}: generator {k} needs a finite p_max_kw")));
            }
        }
        let mut ess_bus = Vec::new();
        for (k, e) in storage.iter().enumerate() {
            ess_bus.push(resolve("storage", e.bus)?);
            if !(e.capacity_kwh > 0.0 && e.capacity_kwh.is_finite()) {
                return Err(DispatchError::Invalid(format!("{name}: storage {k} capacity must be > 0")));
            }
            if !(0.0 <= e.soc_min && e.soc_min < e.soc_max && e.soc_max <= 1.0) {
                return Err(DispatchError::Invalid(format!(
                    "{name}: storage {k} needs 0 <= soc_min < soc_max <= 1, got [{}, {}]",
                    e.soc_min, e.soc_max
                )));
            }
            for (w, eta) in [("eta_ch", e.eta_ch), ("eta_dis", e.eta_dis)] {
                if !(eta > 0.0 && eta <= 1.0) {
                    return Err(DispatchError::Invalid(format!("{name}: storage {k} {w} must lie in (0, 1]")));
                }
            }
            for (w, v) in
                [("p_ch_max_kw", e.p_ch_max_kw), ("p_dis_max_kw", e.p_dis_max_kw), ("q_max_kvar", e.q_max_kvar)]
            {
                nonneg(&format!("storage {k} {w}"), v)?;
            }
        }
        let mut pv_bus = Vec::new();
        for (k, p) in pv.iter().enumerate() {
            pv_bus.push(resolve("pv", p.bus)?);
            nonneg(&format!("pv {k} rated_kw"), p.rated_kw)?;
            nonneg(&format!("pv {k} q_max_kvar"), p.q_max_kvar)?;
        }
        let mut load_bus = Vec::new();
        for (k, l) in loads.iter().enumerate() {
            load_bus.push(resolve("load", l.bus)?);
            nonneg(&format!("load {k} share"), l.share)?;
        }
        let total: f64 = loads.iter().map(|l| l.share).sum();
        if !loads.is_empty() && (total - 1.0).abs() > 1e-9 {
            return Err(DispatchError::Invalid(format!("{name}: load shares sum to {total}, expected 1")));
        }
        nonneg("pcc p_max_kw", pcc.p_max_kw)?;
        nonneg("pcc q_max_kvar", pcc.q_max_kvar)?;
        Ok(MgAssets { name, network, dgs, storage, pv, loads, pcc, dg_bus, ess_bus, pv_bus, load_bus })
    }

    /// Total PV output (kW) at normalized irradiance `irr`.
    pub fn pv_output_kw(&self, irr: f64) -> f64 {
        self.pv.iter().map(|p| p.rated_kw * irr).sum()
    }

    /// Scales every generator's fuel price by `factor`.
    pub fn scale_fuel_price(&mut self, factor: f64) {
        for g in &mut self.dgs {
            g.fuel_price *= factor;
        }
    }
}
