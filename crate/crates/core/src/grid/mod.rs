//! Electrical network model and AC power flow.
//!
//! Everything inside this module works in per-unit on the network's own base.
//! Conversions to kW/kvar happen at the boundaries (`NetworkModel::to_pu`).

mod admittance;
mod flows;
mod powerflow;

pub(crate) use admittance::series_admittance;
pub use admittance::{build_admittance, AdmittanceMatrix};
pub(crate) use flows::end_flow_gradient;
pub use flows::{line_flows, BranchFlow};
pub use powerflow::{
    bus_injections, injection_jacobian, solve_power_flow, solve_power_flow_with, InjectionJacobian, PowerFlowOptions,
    PowerFlowSolution,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("network is disconnected: {0}")]
    Disconnected(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("slack voltage {0} pu outside [0.5, 1.5]")]
    SlackVoltage(f64),
    #[error("power flow diverged after {iterations} iterations (max mismatch {residual:.3e} pu)")]
    Divergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// External identifier as written in network files.
    pub id: u32,
    pub kind: BusKind,
    pub v_min: f64,
    pub v_max: f64,
    /// Nominal demand attached to the bus in the network file (kW / kvar).
    /// Only used by stand-alone power-flow runs.
    #[serde(default)]
    pub p_load_kw: f64,
    #[serde(default)]
    pub q_load_kvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    /// Series resistance (pu).
    pub r: f64,
    /// Series reactance (pu).
    pub x: f64,
    /// Apparent-power flow limit (pu).
    pub limit: f64,
}

/// A balanced single-phase-equivalent network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub name: String,
    pub base_kva: f64,
    pub base_kv: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    // resolved (from, to) bus indices for each branch
    ends: Vec<(usize, usize)>,
    slack: usize,
}

impl NetworkModel {
    /// Validates the raw description and resolves bus ids to indices.
    pub fn new(
        name: impl Into<String>,
        base_kva: f64,
        base_kv: f64,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
    ) -> Result<Self, GridError> {
        if !(base_kva > 0.0 && base_kva.is_finite()) {
            return Err(GridError::Structural(format!("base_kva must be positive, got {base_kva}")));
        }
        if !(base_kv > 0.0 && base_kv.is_finite()) {
            return Err(GridError::Structural(format!("base_kv must be positive, got {base_kv}")));
        }
        if buses.is_empty() {
            return Err(GridError::Structural("network has no buses".into()));
        }
        let slacks: Vec<usize> =
            buses.iter().enumerate().filter(|(_, b)| b.kind == BusKind::Slack).map(|(i, _)| i).collect();
        if slacks.len() != 1 {
            return Err(GridError::Structural(format!("exactly one slack bus required, found {}", slacks.len())));
        }
        let mut seen = std::collections::HashMap::new();
        for (i, b) in buses.iter().enumerate() {
            if seen.insert(b.id, i).is_some() {
                return Err(GridError::Structural(format!("duplicate bus id {}", b.id)));
            }
            if !(b.v_min > 0.0 && b.v_min < b.v_max && b.v_max.is_finite()) {
                return Err(GridError::Structural(format!(
                    "bus {}: voltage limits [{}, {}] invalid",
                    b.id, b.v_min, b.v_max
                )));
            }
        }
        let mut ends = Vec::with_capacity(branches.len());
        for (k, br) in branches.iter().enumerate() {
            let f = *seen
                .get(&br.from)
                .ok_or_else(|| GridError::Structural(format!("branch {k}: unknown from-bus {}", br.from)))?;
            let t = *seen
                .get(&br.to)
                .ok_or_else(|| GridError::Structural(format!("branch {k}: unknown to-bus {}", br.to)))?;
            if f == t {
                return Err(GridError::Structural(format!("branch {k}: self loop on bus {}", br.from)));
            }
            if br.r < 0.0 || br.x < 0.0 || br.r.hypot(br.x) <= 0.0 || !br.r.is_finite() || !br.x.is_finite() {
                return Err(GridError::Structural(format!(
                    "branch {k}: impedance r={} x={} must be non-negative with positive magnitude",
                    br.r, br.x
                )));
            }
            if !(br.limit > 0.0) {
                return Err(GridError::Structural(format!("branch {k}: limit must be positive")));
            }
            ends.push((f, t));
        }
        let net = NetworkModel { name: name.into(), base_kva, base_kv, buses, branches, ends, slack: slacks[0] };
        net.check_connected()?;
        Ok(net)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn slack_index(&self) -> usize {
        self.slack
    }

    /// Resolved `(from, to)` bus indices of branch `k`.
    pub fn branch_ends(&self, k: usize) -> (usize, usize) {
        self.ends[k]
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn to_pu(&self, kw: f64) -> f64 {
        kw / self.base_kva
    }

    pub fn to_kw(&self, pu: f64) -> f64 {
        pu * self.base_kva
    }

    /// Nominal bus demands from the network description as an injection set.
    pub fn nominal_injections(&self) -> InjectionSet {
        InjectionSet {
            p: self.buses.iter().map(|b| -self.to_pu(b.p_load_kw)).collect(),
            q: self.buses.iter().map(|b| -self.to_pu(b.q_load_kvar)).collect(),
        }
    }

    fn check_connected(&self) -> Result<(), GridError> {
        let n = self.buses.len();
        if n > 1 && self.branches.is_empty() {
            return Err(GridError::Disconnected(format!("{n} buses but no branches")));
        }
        let mut adj = vec![Vec::new(); n];
        for &(f, t) in &self.ends {
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![self.slack];
        seen[self.slack] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(GridError::Disconnected(format!("bus {} unreachable from slack", self.buses[i].id)));
        }
        Ok(())
    }
}

/// Per-bus voltage magnitude (pu) and angle (rad).
#[derive(Debug, Clone, PartialEq)]
pub struct BusState {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

impl BusState {
    pub fn flat(n: usize, slack: usize, slack_voltage: f64) -> Self {
        let mut v = vec![1.0; n];
        v[slack] = slack_voltage;
        BusState { v, theta: vec![0.0; n] }
    }
}

/// Net injections per bus in pu, positive into the bus.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSet {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl InjectionSet {
    pub fn zeros(n: usize) -> Self {
        InjectionSet { p: vec![0.0; n], q: vec![0.0; n] }
    }

    pub fn scaled(&self, k: f64) -> Self {
        InjectionSet { p: self.p.iter().map(|x| x * k).collect(), q: self.q.iter().map(|x| x * k).collect() }
    }
}


#[cfg(test)]
mod tests {
    use super::test_nets::*;
    use super::*;

    #[test]
    fn rejects_two_slacks() {
        let err = NetworkModel::new(
            "bad",
            1000.0,
            1.0,
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Slack)],
            vec![Branch { from: 1, to: 2, r: 0.0, x: 0.1, limit: 1.0 }],
        )
        .unwrap_err();
        assert!(matches!(err, GridError::Structural(_)));
    }

    #[test]
    fn zero_branches_is_disconnected() {
        let err = NetworkModel::new("bad", 1000.0, 1.0, vec![bus(1, BusKind::Slack), bus(2, BusKind::Pq)], vec![])
            .unwrap_err();
        assert!(err.to_string().contains("disconnected"));
    }

    #[test]
    fn island_is_disconnected() {
        let err = NetworkModel::new(
            "bad",
            1000.0,
            1.0,
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Pq), bus(3, BusKind::Pq), bus(4, BusKind::Pq)],
            vec![
                Branch { from: 1, to: 2, r: 0.01, x: 0.1, limit: 1.0 },
                Branch { from: 3, to: 4, r: 0.01, x: 0.1, limit: 1.0 },
            ],
        )
        .unwrap_err();
        assert!(matches!(err, GridError::Disconnected(_)));
    }

    #[test]
    fn zero_impedance_rejected() {
        let err = NetworkModel::new(
            "bad",
            1000.0,
            1.0,
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Pq)],
            vec![Branch { from: 1, to: 2, r: 0.0, x: 0.0, limit: 1.0 }],
        )
        .unwrap_err();
        assert!(matches!(err, GridError::Structural(_)));
    }

    #[test]
    fn single_bus_network_is_valid() {
        let net = NetworkModel::new("mg", 1000.0, 0.4, vec![bus(1, BusKind::Slack)], vec![]).unwrap();
        assert_eq!(net.n_buses(), 1);
    }
}
