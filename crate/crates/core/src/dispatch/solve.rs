use log::debug;

use super::slp::{Ctx, Point};
use super::{
    soc_step, ConstraintFamily, DispatchError, DispatchOptions, DispatchProblem, DispatchSolution, MgAssets,
    StorageMode,
};
use crate::grid::BusState;

/// Commitment is enumerated per generator and step while the number of
/// patterns stays at or below `2^PER_STEP_BITS`; beyond that each generator
/// is either on or off for the whole window.
const PER_STEP_BITS: usize = 4;

/// Solves the dispatch with default options.
pub fn solve_dispatch(problem: &DispatchProblem, assets: &MgAssets) -> Result<DispatchSolution, DispatchError> {
    solve_dispatch_with(problem, assets, &DispatchOptions::default())
}

/// Cheapest feasible dispatch over all commitment patterns.
pub fn solve_dispatch_with(
    problem: &DispatchProblem,
    assets: &MgAssets,
    opts: &DispatchOptions,
) -> Result<DispatchSolution, DispatchError> {
    problem.validate(assets)?;
    let steps = problem.steps();
    let n_dg = assets.dgs.len();
    let per_step = n_dg * steps <= PER_STEP_BITS;
    let bits = if per_step { n_dg * steps } else { n_dg };

    let mut best: Option<DispatchSolution> = None;
    let mut least_bad: Option<(ConstraintFamily, f64, String)> = None;
    let mut stalled: Option<DispatchError> = None;
    for mask in 0u32..(1 << bits) {
        let commit: Vec<Vec<bool>> = (0..n_dg)
            .map(|g| {
                (0..steps)
                    .map(|t| {
                        let bit = if per_step { g * steps + t } else { g };
                        mask >> bit & 1 == 1
                    })
                    .collect()
            })
            .collect();
        match solve_pattern(problem, assets, opts, &commit) {
            Ok(sol) => {
                if best.as_ref().is_none_or(|b| sol.objective < b.objective) {
                    best = Some(sol);
                }
            }
            Err(DispatchError::Infeasible { family, violation, detail }) => {
                debug!("{}: pattern {mask:b} infeasible: {family} by {violation:.3e}", assets.name);
                if least_bad.as_ref().is_none_or(|(_, v, _)| violation < *v) {
                    least_bad = Some((family, violation, detail));
                }
            }
            Err(e @ DispatchError::NonConvergence { .. }) => stalled = Some(e),
            Err(e) => return Err(e),
        }
    }
    if let Some(sol) = best {
        return Ok(sol);
    }
    if let Some((family, violation, detail)) = least_bad {
        return Err(DispatchError::Infeasible { family, violation, detail });
    }
    Err(stalled.unwrap_or_else(|| DispatchError::Lp("no commitment pattern evaluated".into())))
}

/// SLP for one commitment pattern, followed by complementarity repair.
fn solve_pattern(
    problem: &DispatchProblem,
    assets: &MgAssets,
    opts: &DispatchOptions,
    commit: &[Vec<bool>],
) -> Result<DispatchSolution, DispatchError> {
    let mut prob = problem.clone();
    if prob.modes.is_empty() {
        prob.modes = vec![vec![StorageMode::Free; problem.steps()]; assets.storage.len()];
    }
    solve_modes(&prob, assets, opts, commit)
}

/// A repair that pushes the state of charge out of bounds fixes the storage
/// mode at the latest netted step up to the violation, discharge-only first,
/// and re-solves both branches. Every level fixes one free step, so the
/// recursion depth is bounded by storage units times steps.
fn solve_modes(
    prob: &DispatchProblem,
    assets: &MgAssets,
    opts: &DispatchOptions,
    commit: &[Vec<bool>],
) -> Result<DispatchSolution, DispatchError> {
    let ctx = Ctx::new(assets, prob, opts, commit);
    let (pt, iterations, history) = ctx.solve(ctx.zero_point())?;
    let worst = ctx
        .violations(&pt)
        .into_iter()
        .filter(|v| v.amount > opts.feas_tol)
        .max_by(|a, b| a.amount.total_cmp(&b.amount));
    if let Some(v) = worst {
        return Err(DispatchError::Infeasible {
            family: v.family,
            violation: v.amount,
            detail: format!("{}: unit {} at step {}", assets.name, v.unit, v.step),
        });
    }
    let relaxed = ctx.to_solution(&pt, iterations, history);
    let broken = match repair(&relaxed, assets, prob, opts.feas_tol) {
        Ok(sol) => return Ok(sol),
        Err(b) => b,
    };
    let fix_at = broken.repaired_steps.iter().rev().find(|&&t| t <= broken.step).copied();
    let Some(fix_at) = fix_at.filter(|&t| prob.modes[broken.storage][t] == StorageMode::Free) else {
        return Err(broken.into_error(&assets.name));
    };
    let mut best: Option<DispatchSolution> = None;
    let mut last_err = None;
    for mode in [StorageMode::DischargeOnly, StorageMode::ChargeOnly] {
        debug!("{}: storage {} step {fix_at} fixed to {mode:?}", assets.name, broken.storage);
        let mut fixed = prob.clone();
        fixed.modes[broken.storage][fix_at] = mode;
        match solve_modes(&fixed, assets, opts, commit) {
            Ok(sol) if best.as_ref().is_none_or(|b| sol.objective < b.objective) => best = Some(sol),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| broken.into_error(&assets.name)))
}

/// A repaired schedule that leaves the state-of-charge band.
#[derive(Debug)]
struct BrokenRepair {
    storage: usize,
    step: usize,
    excess: f64,
    // steps where simultaneous charge and discharge was netted
    repaired_steps: Vec<usize>,
}

impl BrokenRepair {
    fn into_error(self, name: &str) -> DispatchError {
        DispatchError::Infeasible {
            family: ConstraintFamily::StateOfCharge,
            violation: self.excess,
            detail: format!(
                "{name}: storage {} leaves its SOC band at step {} after removing simultaneous charge and discharge",
                self.storage, self.step
            ),
        }
    }
}

fn repair(
    sol: &DispatchSolution,
    assets: &MgAssets,
    problem: &DispatchProblem,
    feas_tol: f64,
) -> Result<DispatchSolution, BrokenRepair> {
    let mut out = sol.clone();
    for (e, ess) in assets.storage.iter().enumerate() {
        let mut repaired_steps = Vec::new();
        let mut soc = problem.initial_soc[e];
        for t in 0..sol.steps() {
            let (ch, dis) = (sol.p_ch_kw[e][t], sol.p_dis_kw[e][t]);
            if ch > 0.0 && dis > 0.0 {
                let net = ch - dis;
                out.p_ch_kw[e][t] = net.max(0.0);
                out.p_dis_kw[e][t] = (-net).max(0.0);
                repaired_steps.push(t);
            }
            out.u_ch[e][t] = if out.p_ch_kw[e][t] > 0.0 { 1.0 } else { 0.0 };
            out.u_dis[e][t] = if out.p_dis_kw[e][t] > 0.0 { 1.0 } else { 0.0 };
            soc = soc_step(soc, out.p_ch_kw[e][t], out.p_dis_kw[e][t], ess, problem.dt_h);
            out.soc[e][t] = soc;
            let (over, under) = (soc - ess.soc_max, ess.soc_min - soc);
            if over > feas_tol || under > feas_tol {
                return Err(BrokenRepair { storage: e, step: t, excess: over.max(under), repaired_steps });
            }
        }
        let short = problem.initial_soc[e] - soc;
        if problem.terminal_soc && short > feas_tol {
            return Err(BrokenRepair { storage: e, step: sol.steps() - 1, excess: short, repaired_steps });
        }
    }
    Ok(out)
}

/// Replaces simultaneous charging and discharging by the net power and
/// re-propagates the state of charge. Fails with a state-of-charge
/// infeasibility if the repaired trajectory leaves its bounds.
pub fn repair_complementarity(
    solution: &DispatchSolution,
    assets: &MgAssets,
    problem: &DispatchProblem,
) -> Result<DispatchSolution, DispatchError> {
    repair(solution, assets, problem, DispatchOptions::default().feas_tol).map_err(|b| b.into_error(&assets.name))
}

/// PCC exchange and internal state when the dispatched setpoints meet the
/// true demand and irradiance.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedExchange {
    pub p_pcc_kw: Vec<f64>,
    pub q_pcc_kvar: Vec<f64>,
    pub states: Vec<BusState>,
    /// Window operating cost with the realized exchange ($).
    pub operating_cost: f64,
}

/// Applies the setpoints of `solution` to the true load and irradiance with
/// the PCC voltages of `problem`.
pub fn realize_exchange(
    assets: &MgAssets,
    problem: &DispatchProblem,
    solution: &DispatchSolution,
    true_load_kw: &[f64],
    true_irradiance: &[f64],
) -> Result<RealizedExchange, DispatchError> {
    let mut truth = problem.clone();
    truth.load_kw = true_load_kw.to_vec();
    truth.irradiance = true_irradiance.to_vec();
    truth.validate(assets)?;
    let opts = DispatchOptions::default();
    let ctx = Ctx::new(assets, &truth, &opts, &solution.committed);
    let pt = ctx.project(Point::from_solution(solution, assets.network.base_kva), Some(&solution.states))?;
    let p_pcc_kw: Vec<f64> = pt.p_pcc.iter().map(|p| p * assets.network.base_kva).collect();
    Ok(RealizedExchange {
        operating_cost: super::operating_cost(
            assets,
            &problem.retail_price,
            &p_pcc_kw,
            &solution.p_dg_kw,
            &solution.committed,
        ),
        p_pcc_kw,
        q_pcc_kvar: pt.q_pcc.iter().map(|q| q * assets.network.base_kva).collect(),
        states: pt.states,
    })
}
