//! Independent feasibility check of a dispatched window.
//!
//! Nothing here reuses the solver's linearizations: nodal balances come from
//! the branch flows of the returned bus states, line limits use the exact
//! apparent power and the state of charge is re-propagated from the storage
//! powers.

use super::{soc_step, ConstraintFamily, DispatchProblem, DispatchSolution, MgAssets};
use crate::grid::line_flows;

/// The stored trajectory must follow the recursion to rounding.
const SOC_RECURSION_TOL: f64 = 1e-9;

/// One constraint that exceeds its limit by more than the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditFinding {
    pub family: ConstraintFamily,
    pub step: usize,
    /// Excess in pu on the network base, or as an SOC fraction.
    pub excess: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditReport {
    pub findings: Vec<AuditFinding>,
    /// Largest excess over all checked constraints, findings or not.
    pub max_excess: f64,
    pub checked: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.findings.is_empty()
    }
}

struct Checker {
    tol: f64,
    report: AuditReport,
}

impl Checker {
    fn check(&mut self, family: ConstraintFamily, step: usize, excess: f64, detail: impl FnOnce() -> String) {
        self.check_tol(family, step, excess, self.tol, detail)
    }

    fn check_tol(
        &mut self,
        family: ConstraintFamily,
        step: usize,
        excess: f64,
        tol: f64,
        detail: impl FnOnce() -> String,
    ) {
        self.report.checked += 1;
        let excess = if excess.is_nan() { f64::INFINITY } else { excess };
        self.report.max_excess = self.report.max_excess.max(excess);
        if excess > tol {
            self.report.findings.push(AuditFinding { family, step, excess, detail: detail() });
        }
    }

    /// `lo ≤ x ≤ hi`
    fn within(&mut self, family: ConstraintFamily, step: usize, x: f64, lo: f64, hi: f64, what: &str) {
        self.check(family, step, (x - hi).max(lo - x), || format!("{what} = {x:.6} outside [{lo:.6}, {hi:.6}]"));
    }
}

/// Re-evaluates every operating constraint of `sol`. Powers are compared in
/// pu of the microgrid base so that one tolerance fits all families.
pub fn audit(assets: &MgAssets, problem: &DispatchProblem, sol: &DispatchSolution, feas_tol: f64) -> AuditReport {
    use ConstraintFamily::*;
    let net = &assets.network;
    let base = net.base_kva;
    let pu = |kw: f64| kw / base;
    let mut c = Checker { tol: feas_tol, report: AuditReport::default() };
    let steps = problem.steps();
    if sol.steps() != steps || sol.states.len() != steps {
        c.check(PowerBalance, 0, f64::INFINITY, || "solution length differs from the window".into());
        return c.report;
    }

    for t in 0..steps {
        for (g, dg) in assets.dgs.iter().enumerate() {
            let on = if sol.committed[g][t] { 1.0 } else { 0.0 };
            c.within(Capacity, t, pu(sol.p_dg_kw[g][t]), 0.0, pu(dg.p_max_kw * on), &format!("P_dg[{g}]"));
            c.within(Capacity, t, pu(sol.q_dg_kvar[g][t]), 0.0, pu(dg.q_max_kvar * on), &format!("Q_dg[{g}]"));
            let prev = if t == 0 { problem.dg_prev_kw.as_ref().map(|p| p[g]) } else { Some(sol.p_dg_kw[g][t - 1]) };
            if let Some(prev) = prev {
                let d = pu(sol.p_dg_kw[g][t] - prev);
                c.within(Ramp, t, d, -pu(dg.ramp_kw), pu(dg.ramp_kw), &format!("ΔP_dg[{g}]"));
            }
        }
        for (e, ess) in assets.storage.iter().enumerate() {
            let (uc, ud) = (sol.u_ch[e][t], sol.u_dis[e][t]);
            for (name, u) in [("u_ch", uc), ("u_dis", ud)] {
                c.check(Complementarity, t, u.abs().min((u - 1.0).abs()), || {
                    format!("{name}[{e}] = {u} is not binary")
                });
            }
            c.check(Complementarity, t, uc + ud - 1.0, || format!("storage {e} charges and discharges"));
            c.within(Capacity, t, pu(sol.p_ch_kw[e][t]), 0.0, pu(ess.p_ch_max_kw * uc), &format!("P_ch[{e}]"));
            c.within(Capacity, t, pu(sol.p_dis_kw[e][t]), 0.0, pu(ess.p_dis_max_kw * ud), &format!("P_dis[{e}]"));
            c.within(
                Capacity,
                t,
                pu(sol.q_ess_kvar[e][t]),
                -pu(ess.q_max_kvar),
                pu(ess.q_max_kvar),
                &format!("Q_ess[{e}]"),
            );
            let prev = if t == 0 { problem.initial_soc[e] } else { sol.soc[e][t - 1] };
            let expect = soc_step(prev, sol.p_ch_kw[e][t], sol.p_dis_kw[e][t], ess, problem.dt_h);
            c.check_tol(StateOfCharge, t, (sol.soc[e][t] - expect).abs(), SOC_RECURSION_TOL, || {
                format!("SOC[{e}] = {} but the recursion gives {expect}", sol.soc[e][t])
            });
            c.within(StateOfCharge, t, sol.soc[e][t], ess.soc_min, ess.soc_max, &format!("SOC[{e}]"));
        }
        for (k, pv) in assets.pv.iter().enumerate() {
            c.within(
                Capacity,
                t,
                pu(sol.q_pv_kvar[k][t]),
                -pu(pv.q_max_kvar),
                pu(pv.q_max_kvar),
                &format!("Q_pv[{k}]"),
            );
        }
        c.within(PccLimit, t, pu(sol.p_pcc_kw[t]), -pu(assets.pcc.p_max_kw), pu(assets.pcc.p_max_kw), "P_pcc");
        c.within(PccLimit, t, pu(sol.q_pcc_kvar[t]), -pu(assets.pcc.q_max_kvar), pu(assets.pcc.q_max_kvar), "Q_pcc");

        let st = &sol.states[t];
        let slack = net.slack_index();
        c.check(Voltage, t, (st.v[slack] - problem.v_pcc[t]).abs(), || {
            format!("PCC voltage {} differs from the estimate {}", st.v[slack], problem.v_pcc[t])
        });
        for (i, bus) in net.buses.iter().enumerate() {
            if i != slack {
                c.within(Voltage, t, st.v[i], bus.v_min, bus.v_max, &format!("V at bus {}", bus.id));
            }
        }

        // local injections from the setpoints and the load/PV estimates
        let n = net.n_buses();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for l in &assets.loads {
            let i = net.bus_index(l.bus).unwrap_or(slack);
            p[i] -= pu(l.share * problem.load_kw[t]);
            q[i] -= pu(l.q_per_p * l.share * problem.load_kw[t]);
        }
        for (k, pv) in assets.pv.iter().enumerate() {
            let i = net.bus_index(pv.bus).unwrap_or(slack);
            p[i] += pu(pv.rated_kw * problem.irradiance[t]);
            q[i] += pu(sol.q_pv_kvar[k][t]);
        }
        for (g, dg) in assets.dgs.iter().enumerate() {
            let i = net.bus_index(dg.bus).unwrap_or(slack);
            p[i] += pu(sol.p_dg_kw[g][t]);
            q[i] += pu(sol.q_dg_kvar[g][t]);
        }
        for (e, ess) in assets.storage.iter().enumerate() {
            let i = net.bus_index(ess.bus).unwrap_or(slack);
            p[i] += pu(sol.p_dis_kw[e][t] - sol.p_ch_kw[e][t]);
            q[i] -= pu(sol.q_ess_kvar[e][t]);
        }
        p[slack] -= pu(sol.p_pcc_kw[t]);
        q[slack] -= pu(sol.q_pcc_kvar[t]);

        let flows = match line_flows(net, st) {
            Ok(f) => f,
            Err(e) => {
                c.check(PowerBalance, t, f64::INFINITY, || e.to_string());
                continue;
            }
        };
        let mut out_p = vec![0.0; n];
        let mut out_q = vec![0.0; n];
        for (k, (f, br)) in flows.iter().zip(&net.branches).enumerate() {
            let (a, b) = net.branch_ends(k);
            out_p[a] += f.p_from;
            out_q[a] += f.q_from;
            out_p[b] += f.p_to;
            out_q[b] += f.q_to;
            for (end, pp, qq) in [("from", f.p_from, f.q_from), ("to", f.p_to, f.q_to)] {
                let s = pp.hypot(qq);
                c.check(LineLimit, t, s - br.limit, || {
                    format!("branch {}-{} {end} end carries {s:.6} pu > {}", br.from, br.to, br.limit)
                });
            }
        }
        for i in 0..n {
            let id = net.buses[i].id;
            c.check(PowerBalance, t, (p[i] - out_p[i]).abs(), || format!("active balance at bus {id}"));
            c.check(PowerBalance, t, (q[i] - out_q[i]).abs(), || format!("reactive balance at bus {id}"));
        }
    }
    if problem.terminal_soc {
        for (e, _) in assets.storage.iter().enumerate() {
            let end = sol.soc[e][steps - 1];
            c.check(StateOfCharge, steps - 1, problem.initial_soc[e] - end, || {
                format!("storage {e} ends at SOC {end} below its initial {}", problem.initial_soc[e])
            });
        }
    }
    c.report
}
