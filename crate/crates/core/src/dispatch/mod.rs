//! Windowed economic dispatch of one microgrid against retail prices.
//!
//! `solve_dispatch` picks a generator commitment pattern, solves the
//! power-flow-constrained dispatch for it by sequential linear programming,
//! and removes any simultaneous charging and discharging the LP relaxation
//! left behind. `audit` re-checks a returned solution from scratch.

mod assets;
mod audit;
mod problem;
mod slp;
mod solve;

pub use assets::{fuel_cost, soc_step, DieselGenerator, LoadShare, MgAssets, PccLimits, PvUnit, Storage};
pub use audit::{audit, AuditFinding, AuditReport};
pub use problem::{operating_cost, DispatchProblem, DispatchSolution, StorageMode};
pub use solve::{realize_exchange, repair_complementarity, solve_dispatch, solve_dispatch_with, RealizedExchange};

use std::fmt;

use thiserror::Error;

use crate::grid::{GridError, PowerFlowOptions};

/// Constraint groups used to name the cause of infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintFamily {
    PccLimit,
    Voltage,
    LineLimit,
    Ramp,
    StateOfCharge,
    Complementarity,
    PowerBalance,
    Capacity,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintFamily::PccLimit => "PCC exchange limit",
            ConstraintFamily::Voltage => "bus voltage limit",
            ConstraintFamily::LineLimit => "line flow limit",
            ConstraintFamily::Ramp => "generator ramp limit",
            ConstraintFamily::StateOfCharge => "state-of-charge limit",
            ConstraintFamily::Complementarity => "charge/discharge complementarity",
            ConstraintFamily::PowerBalance => "nodal power balance",
            ConstraintFamily::Capacity => "unit capacity",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    /// No commitment pattern and storage mode choice satisfies every
    /// constraint. `violation` is the smallest worst-case excess found (pu or
    /// SOC fraction).
    #[error("infeasible: {family} violated by {violation:.3e} ({detail})")]
    Infeasible { family: ConstraintFamily, violation: f64, detail: String },
    #[error("SLP did not converge in {iterations} iterations")]
    NonConvergence { iterations: usize, last: Box<DispatchSolution> },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("LP solver: {0}")]
    Lp(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchOptions {
    /// Largest tolerated constraint violation (pu, or SOC fraction).
    pub feas_tol: f64,
    /// SLP stops once a step moves no setpoint by more than this (pu).
    pub slp_tol: f64,
    pub max_outer: usize,
    /// Initial trust-region radius (pu).
    pub initial_radius: f64,
    pub max_radius: f64,
    /// Fuel-curve segments per generator and step.
    pub pwl_segments: usize,
    pub pf: PowerFlowOptions,
}

impl Default for DispatchOptions {
    fn default() -> Self {
        DispatchOptions {
            feas_tol: 1e-4,
            slp_tol: 1e-5,
            max_outer: 50,
            initial_radius: 0.1,
            max_radius: 1.0,
            pwl_segments: 10,
            pf: PowerFlowOptions::default(),
        }
    }
}
