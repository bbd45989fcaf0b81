use rayon::prelude::*;

use super::{CoordinationError, Settings, System};
use crate::dispatch::{
    realize_exchange, solve_dispatch_with, DispatchProblem, DispatchSolution, MgAssets, RealizedExchange,
};
use crate::grid::{solve_power_flow_with, BusState};
use crate::rl::{ActionVector, StateVector};

/// Feeder slack voltage (pu).
const SUBSTATION_VOLTAGE: f64 = 1.0;

/// True inputs of one decision window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowInputs {
    /// First profile step of the window.
    pub start: usize,
    pub dt_h: f64,
    pub wholesale_price: Vec<f64>,
    /// `[mg][step]`, kW.
    pub load_kw: Vec<Vec<f64>>,
    /// `[mg][step]`, normalized.
    pub irradiance: Vec<Vec<f64>>,
    /// Microgrid assets with the window's overrides applied.
    pub assets: Vec<MgAssets>,
}

impl WindowInputs {
    pub fn steps(&self) -> usize {
        self.wholesale_price.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeOutcome {
    /// Each microgrid's dispatch against its forecast.
    pub solutions: Vec<DispatchSolution>,
    /// The same setpoints operated against the true load and irradiance.
    pub realized: Vec<RealizedExchange>,
    /// Feeder state per step.
    pub feeder_states: Vec<BusState>,
    /// Power sold to the wholesale market per step (kW, negative = bought).
    pub p_w_kw: Vec<f64>,
    /// Feeder active losses per step (kW).
    pub losses_kw: Vec<f64>,
    /// Converged PCC voltages, `[mg][step]`.
    pub v_pcc: Vec<Vec<f64>>,
    pub iterations: usize,
    /// PCC voltage estimates used at each iteration, `[iteration][mg][step]`.
    pub trajectory: Vec<Vec<Vec<f64>>>,
}

impl ExchangeOutcome {
    /// Realized PCC exchange, `[mg][step]` (kW, positive = export).
    pub fn pcc_kw(&self) -> Vec<Vec<f64>> {
        self.realized.iter().map(|r| r.p_pcc_kw.clone()).collect()
    }
}

/// Iterates microgrid dispatch and feeder power flow until the PCC voltages
/// settle.
///
/// Each microgrid dispatches against `forecast` (its own view of load and
/// irradiance; the truths when `None`) and the current PCC voltage
/// estimate; the setpoints are then operated against the truths, and the
/// resulting PCC exchanges enter the feeder as fixed PQ injections.
pub fn fixed_point_exchange(
    system: &System,
    inputs: &WindowInputs,
    action: &ActionVector,
    forecast: Option<&StateVector>,
    settings: &Settings,
) -> Result<ExchangeOutcome, CoordinationError> {
    let n = system.n_mgs();
    let steps = inputs.steps();
    if action.prices.len() != n || action.prices.iter().any(|p| p.len() != steps) {
        return Err(CoordinationError::Invalid(format!("action must hold {n}×{steps} prices")));
    }
    if !action.within(&settings.bounds) {
        return Err(CoordinationError::Invalid("action lies outside the price bounds".into()));
    }
    let truth = inputs.truth_state();
    let forecast = forecast.unwrap_or(&truth);
    let cfg = settings.fixed_point;
    let feeder = &system.feeder;
    let base = feeder.base_kva;

    let mut v_pcc = vec![vec![cfg.initial_voltage; steps]; n];
    let mut trajectory = Vec::new();
    let mut warm: Vec<Option<BusState>> = vec![None; steps];
    let mut last_change = f64::INFINITY;

    for iteration in 1..=cfg.max_iterations {
        trajectory.push(v_pcc.clone());
        let per_mg: Vec<(DispatchSolution, RealizedExchange)> = (0..n)
            .into_par_iter()
            .map(|mg| {
                let assets = &inputs.assets[mg];
                let mut prob = DispatchProblem::new(
                    assets,
                    action.prices[mg].clone(),
                    forecast.load_kw[mg].clone(),
                    forecast.irradiance[mg].clone(),
                    inputs.dt_h,
                );
                prob.v_pcc = v_pcc[mg].clone();
                prob.terminal_soc = settings.terminal_soc;
                let sol = solve_dispatch_with(&prob, assets, &settings.dispatch)?;
                let real = realize_exchange(assets, &prob, &sol, &inputs.load_kw[mg], &inputs.irradiance[mg])?;
                Ok((sol, real))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .enumerate()
            .map(|(mg, r)| r.map_err(|source| CoordinationError::Dispatch { mg, source }))
            .collect::<Result<_, _>>()?;

        let mut states = Vec::with_capacity(steps);
        let mut p_w_kw = Vec::with_capacity(steps);
        let mut losses_kw = Vec::with_capacity(steps);
        let mut next = vec![vec![0.0; steps]; n];
        for t in 0..steps {
            let mut inj = system.background.clone();
            for (mg, (_, real)) in per_mg.iter().enumerate() {
                let bus = system.microgrids[mg].pcc_index;
                inj.p[bus] += real.p_pcc_kw[t] / base;
                inj.q[bus] += real.q_pcc_kvar[t] / base;
            }
            let pf = solve_power_flow_with(
                feeder,
                &system.y,
                &inj,
                SUBSTATION_VOLTAGE,
                &settings.dispatch.pf,
                warm[t].as_ref(),
            )?;
            let slack = feeder.slack_index();
            let injected: f64 = inj.p.iter().enumerate().filter(|&(i, _)| i != slack).map(|(_, p)| p).sum();
            losses_kw.push((pf.slack_p + injected) * base);
            p_w_kw.push(-pf.slack_p * base);
            for (mg, m) in system.microgrids.iter().enumerate() {
                next[mg][t] = pf.state.v[m.pcc_index];
            }
            warm[t] = Some(pf.state.clone());
            states.push(pf.state);
        }

        last_change = v_pcc.iter().flatten().zip(next.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if last_change < cfg.v_threshold {
            let (solutions, realized) = per_mg.into_iter().unzip();
            return Ok(ExchangeOutcome {
                solutions,
                realized,
                feeder_states: states,
                p_w_kw,
                losses_kw,
                v_pcc: next,
                iterations: iteration,
                trajectory,
            });
        }
        v_pcc = next;
    }
    trajectory.push(v_pcc);
    Err(CoordinationError::FixedPoint { iterations: cfg.max_iterations, last_change, trajectory })
}
