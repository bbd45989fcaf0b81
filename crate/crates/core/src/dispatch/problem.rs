use super::{DispatchError, MgAssets};
use crate::grid::BusState;

/// Operating mode allowed for one storage unit at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StorageMode {
    /// Charging and discharging both allowed (relaxed).
    #[default]
    Free,
    ChargeOnly,
    DischargeOnly,
}

/// One microgrid's windowed dispatch task.
///
/// Aggregate load and irradiance are the controller's estimates; they are
/// spread over buses by the asset load shares and PV ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchProblem {
    /// Step length (h). Only the state-of-charge recursion depends on it.
    pub dt_h: f64,
    /// Retail price per step ($/kWh).
    pub retail_price: Vec<f64>,
    /// Estimated PCC voltage per step (pu).
    pub v_pcc: Vec<f64>,
    /// Estimated aggregate active demand per step (kW).
    pub load_kw: Vec<f64>,
    /// Estimated normalized irradiance per step.
    pub irradiance: Vec<f64>,
    /// Initial state of charge of each storage unit.
    pub initial_soc: Vec<f64>,
    /// Generator output in the step before the window, for the first ramp.
    pub dg_prev_kw: Option<Vec<f64>>,
    /// Require every storage unit to end the window at least as full as it
    /// started.
    pub terminal_soc: bool,
    /// Allowed storage modes `[storage][step]`; empty means all free.
    pub modes: Vec<Vec<StorageMode>>,
}

impl DispatchProblem {
    /// A problem with flat 1.0 pu PCC voltage, storage at mid-range charge
    /// and no ramp history.
    pub fn new(assets: &MgAssets, retail_price: Vec<f64>, load_kw: Vec<f64>, irradiance: Vec<f64>, dt_h: f64) -> Self {
        let t = retail_price.len();
        DispatchProblem {
            dt_h,
            v_pcc: vec![1.0; t],
            retail_price,
            load_kw,
            irradiance,
            initial_soc: assets.storage.iter().map(|e| 0.5 * (e.soc_min + e.soc_max)).collect(),
            dg_prev_kw: None,
            terminal_soc: false,
            modes: Vec::new(),
        }
    }

    pub fn steps(&self) -> usize {
        self.retail_price.len()
    }

    pub(crate) fn mode(&self, ess: usize, t: usize) -> StorageMode {
        self.modes.get(ess).and_then(|m| m.get(t)).copied().unwrap_or_default()
    }

    pub fn validate(&self, assets: &MgAssets) -> Result<(), DispatchError> {
        let t = self.steps();
        if t == 0 {
            return Err(DispatchError::Invalid("empty dispatch window".into()));
        }
        for (what, len) in
            [("v_pcc", self.v_pcc.len()), ("load_kw", self.load_kw.len()), ("irradiance", self.irradiance.len())]
        {
            if len != t {
                return Err(DispatchError::Invalid(format!("{what} has {len} steps, prices have {t}")));
            }
        }
        if !(self.dt_h > 0.0 && self.dt_h.is_finite()) {
            return Err(DispatchError::Invalid(format!("step length {} h must be > 0", self.dt_h)));
        }
        if self.retail_price.iter().any(|p| !p.is_finite()) {
            return Err(DispatchError::Invalid("non-finite retail price".into()));
        }
        if self.load_kw.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(DispatchError::Invalid("load estimates must be finite and >= 0".into()));
        }
        if self.irradiance.iter().any(|i| !(0.0..=1.0).contains(i)) {
            return Err(DispatchError::Invalid("irradiance estimates must lie in [0, 1]".into()));
        }
        if self.v_pcc.iter().any(|v| !(0.5..=1.5).contains(v)) {
            return Err(DispatchError::Invalid("PCC voltage estimate outside [0.5, 1.5] pu".into()));
        }
        if self.initial_soc.len() != assets.storage.len() {
            return Err(DispatchError::Invalid(format!(
                "{} initial SOC values for {} storage units",
                self.initial_soc.len(),
                assets.storage.len()
            )));
        }
        for (k, (s, e)) in self.initial_soc.iter().zip(&assets.storage).enumerate() {
            if !(e.soc_min..=e.soc_max).contains(s) {
                return Err(DispatchError::Invalid(format!("storage {k}: initial SOC {s} outside its bounds")));
            }
        }
        if let Some(prev) = &self.dg_prev_kw {
            if prev.len() != assets.dgs.len() {
                return Err(DispatchError::Invalid("dg_prev_kw length differs from generator count".into()));
            }
        }
        if !self.modes.is_empty()
            && (self.modes.len() != assets.storage.len() || self.modes.iter().any(|m| m.len() != t))
        {
            return Err(DispatchError::Invalid("storage modes must be [storage][step]".into()));
        }
        Ok(())
    }
}

/// Setpoints and resulting exchange of one microgrid over the window. Unit
/// series are indexed `[unit][step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    pub p_dg_kw: Vec<Vec<f64>>,
    pub q_dg_kvar: Vec<Vec<f64>>,
    /// Whether each generator is running (and paying its constant fuel
    /// term) at each step.
    pub committed: Vec<Vec<bool>>,
    pub p_ch_kw: Vec<Vec<f64>>,
    pub p_dis_kw: Vec<Vec<f64>>,
    pub u_ch: Vec<Vec<f64>>,
    pub u_dis: Vec<Vec<f64>>,
    pub q_ess_kvar: Vec<Vec<f64>>,
    /// State of charge at the end of each step.
    pub soc: Vec<Vec<f64>>,
    pub q_pv_kvar: Vec<Vec<f64>>,
    /// Exchange at the PCC, positive for export from the microgrid.
    pub p_pcc_kw: Vec<f64>,
    pub q_pcc_kvar: Vec<f64>,
    /// Internal network state per step.
    pub states: Vec<BusState>,
    /// Window operating cost ($): `Σ_t (−λ^R P^PCC + Σ λ^F F)`.
    pub objective: f64,
    /// Outer iterations of the accepted solve.
    pub iterations: usize,
    /// Penalized objective after every accepted step, starting point first.
    pub merit_history: Vec<f64>,
}

impl DispatchSolution {
    pub fn steps(&self) -> usize {
        self.p_pcc_kw.len()
    }

    /// Fuel burnt over the window (L), constant term only on committed steps.
    pub fn fuel_l(&self, assets: &MgAssets) -> f64 {
        let mut total = 0.0;
        for (g, dg) in assets.dgs.iter().enumerate() {
            for t in 0..self.steps() {
                if self.committed[g][t] {
                    total += dg.fuel_l(self.p_dg_kw[g][t]);
                }
            }
        }
        total
    }
}

/// Window operating cost of a microgrid for given PCC exchange and generator
/// schedule: `Σ_t (−λ^R_t P^PCC_t + Σ_g λ^F_g F_g(P_g,t))`, with the constant
/// fuel term paid only on committed steps.
pub fn operating_cost(
    assets: &MgAssets,
    retail_price: &[f64],
    p_pcc_kw: &[f64],
    p_dg_kw: &[Vec<f64>],
    committed: &[Vec<bool>],
) -> f64 {
    let mut cost = 0.0;
    for t in 0..retail_price.len() {
        cost -= retail_price[t] * p_pcc_kw[t];
        for (g, dg) in assets.dgs.iter().enumerate() {
            if committed[g][t] {
                cost += dg.fuel_price * dg.fuel_l(p_dg_kw[g][t]);
            }
        }
    }
    cost
}
