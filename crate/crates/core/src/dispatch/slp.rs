//! Sequential linear programming for one commitment pattern.
//!
//! Every iterate is a set of controllable setpoints (generator, storage and
//! inverter powers) projected onto the AC power-flow manifold by a Newton
//! solve with the PCC bus as slack. The LP around an iterate linearizes the
//! nodal balances and branch flows, replaces the fuel curve by tangent cuts
//! over the trust box, and relaxes PCC, voltage, line, ramp and state-of-charge
//! limits with penalized slacks. Steps are accepted when the penalized
//! objective (merit) falls.

use std::f64::consts::PI;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};

use super::{
    ConstraintFamily, DispatchError, DispatchOptions, DispatchProblem, DispatchSolution, MgAssets, StorageMode,
};
use crate::grid::{
    build_admittance, bus_injections, end_flow_gradient, injection_jacobian, series_admittance, solve_power_flow_with,
    AdmittanceMatrix, BusState, GridError, InjectionSet,
};

/// Penalty per kW-equivalent of constraint violation ($).
const PENALTY_PER_KW: f64 = 1e3;
const FACETS: usize = 8;

pub(crate) struct Ctx<'a> {
    assets: &'a MgAssets,
    prob: &'a DispatchProblem,
    opts: &'a DispatchOptions,
    commit: &'a [Vec<bool>],
    y: AdmittanceMatrix,
    base: f64,
    slack: usize,
    others: Vec<usize>,
    steps: usize,
    // fixed injections (pu) from estimated PV and demand, [step][bus]
    p_fixed: Vec<Vec<f64>>,
    q_fixed: Vec<Vec<f64>>,
    // branch conductance/susceptance
    gb: Vec<(f64, f64)>,
    w_power: f64,
    w_soc: Vec<f64>,
}

/// Setpoints and the resulting network state, all in pu on the network base.
#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub p_dg: Vec<Vec<f64>>,
    pub q_dg: Vec<Vec<f64>>,
    pub p_ch: Vec<Vec<f64>>,
    pub p_dis: Vec<Vec<f64>>,
    pub q_ess: Vec<Vec<f64>>,
    pub q_pv: Vec<Vec<f64>>,
    pub soc: Vec<Vec<f64>>,
    pub states: Vec<BusState>,
    pub p_pcc: Vec<f64>,
    pub q_pcc: Vec<f64>,
    pub merit: f64,
}

impl Point {
    /// Setpoints of a dispatched solution, state still to be projected.
    pub fn from_solution(sol: &DispatchSolution, base: f64) -> Point {
        let pu = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            m.iter().map(|row| row.iter().map(|v| v / base).collect()).collect()
        };
        Point {
            p_dg: pu(&sol.p_dg_kw),
            q_dg: pu(&sol.q_dg_kvar),
            p_ch: pu(&sol.p_ch_kw),
            p_dis: pu(&sol.p_dis_kw),
            q_ess: pu(&sol.q_ess_kvar),
            q_pv: pu(&sol.q_pv_kvar),
            soc: sol.soc.clone(),
            states: Vec::new(),
            p_pcc: vec![0.0; sol.steps()],
            q_pcc: vec![0.0; sol.steps()],
            merit: f64::INFINITY,
        }
    }
}

impl<'a> Ctx<'a> {
    pub fn new(
        assets: &'a MgAssets,
        prob: &'a DispatchProblem,
        opts: &'a DispatchOptions,
        commit: &'a [Vec<bool>],
    ) -> Self {
        let net = &assets.network;
        let base = net.base_kva;
        let n = net.n_buses();
        let steps = prob.steps();
        let mut p_fixed = vec![vec![0.0; n]; steps];
        let mut q_fixed = vec![vec![0.0; n]; steps];
        for t in 0..steps {
            for (l, &i) in assets.loads.iter().zip(&assets.load_bus) {
                let p = l.share * prob.load_kw[t];
                p_fixed[t][i] -= p / base;
                q_fixed[t][i] -= l.q_per_p * p / base;
            }
            for (pv, &i) in assets.pv.iter().zip(&assets.pv_bus) {
                p_fixed[t][i] += pv.rated_kw * prob.irradiance[t] / base;
            }
        }
        let slack = net.slack_index();
        Ctx {
            assets,
            prob,
            opts,
            commit,
            y: build_admittance(net),
            base,
            slack,
            others: (0..n).filter(|&i| i != slack).collect(),
            steps,
            p_fixed,
            q_fixed,
            gb: net.branches.iter().map(|b| series_admittance(b.r, b.x)).collect(),
            w_power: PENALTY_PER_KW * base,
            w_soc: assets.storage.iter().map(|e| PENALTY_PER_KW * e.capacity_kwh).collect(),
        }
    }

    fn n_dg(&self) -> usize {
        self.assets.dgs.len()
    }

    fn n_ess(&self) -> usize {
        self.assets.storage.len()
    }

    fn n_pv(&self) -> usize {
        self.assets.pv.len()
    }

    /// All setpoints at zero.
    pub fn zero_point(&self) -> Point {
        let z = |k: usize| vec![vec![0.0; self.steps]; k];
        Point {
            p_dg: z(self.n_dg()),
            q_dg: z(self.n_dg()),
            p_ch: z(self.n_ess()),
            p_dis: z(self.n_ess()),
            q_ess: z(self.n_ess()),
            q_pv: z(self.n_pv()),
            soc: z(self.n_ess()),
            states: Vec::new(),
            p_pcc: vec![0.0; self.steps],
            q_pcc: vec![0.0; self.steps],
            merit: f64::INFINITY,
        }
    }

    /// Local net injection (pu) at every bus for step `t`, slack included.
    fn injections(&self, pt: &Point, t: usize) -> InjectionSet {
        let mut p = self.p_fixed[t].clone();
        let mut q = self.q_fixed[t].clone();
        for (g, &i) in self.assets.dg_bus.iter().enumerate() {
            p[i] += pt.p_dg[g][t];
            q[i] += pt.q_dg[g][t];
        }
        for (e, &i) in self.assets.ess_bus.iter().enumerate() {
            p[i] += pt.p_dis[e][t] - pt.p_ch[e][t];
            q[i] -= pt.q_ess[e][t];
        }
        for (k, &i) in self.assets.pv_bus.iter().enumerate() {
            q[i] += pt.q_pv[k][t];
        }
        InjectionSet { p, q }
    }

    /// Solves the internal power flow for the setpoints in `pt` and fills in
    /// state, PCC exchange, state of charge and merit.
    pub fn project(&self, mut pt: Point, warm: Option<&[BusState]>) -> Result<Point, GridError> {
        let net = &self.assets.network;
        pt.states.clear();
        for t in 0..self.steps {
            let inj = self.injections(&pt, t);
            let v_pcc = self.prob.v_pcc[t];
            let (state, sp, sq) = if net.n_buses() == 1 {
                (BusState { v: vec![v_pcc], theta: vec![0.0] }, 0.0, 0.0)
            } else {
                let sol = solve_power_flow_with(net, &self.y, &inj, v_pcc, &self.opts.pf, warm.and_then(|w| w.get(t)))?;
                (sol.state, sol.slack_p, sol.slack_q)
            };
            pt.p_pcc[t] = inj.p[self.slack] - sp;
            pt.q_pcc[t] = inj.q[self.slack] - sq;
            pt.states.push(state);
        }
        for (e, ess) in self.assets.storage.iter().enumerate() {
            let mut soc = self.prob.initial_soc[e];
            for t in 0..self.steps {
                soc = super::soc_step(soc, pt.p_ch[e][t] * self.base, pt.p_dis[e][t] * self.base, ess, self.prob.dt_h);
                pt.soc[e][t] = soc;
            }
        }
        pt.merit = self.cost(&pt) + self.penalty(&pt);
        Ok(pt)
    }

    /// Unpenalized window cost ($).
    pub fn cost(&self, pt: &Point) -> f64 {
        let mut c = 0.0;
        for t in 0..self.steps {
            c -= self.prob.retail_price[t] * pt.p_pcc[t] * self.base;
            for (g, dg) in self.assets.dgs.iter().enumerate() {
                if self.commit[g][t] {
                    c += dg.fuel_price * dg.fuel_l(pt.p_dg[g][t] * self.base);
                }
            }
        }
        c
    }

    fn penalty(&self, pt: &Point) -> f64 {
        self.violations(pt)
            .iter()
            .map(|v| match v.family {
                ConstraintFamily::StateOfCharge => self.w_soc[v.unit] * v.amount,
                _ => self.w_power * v.amount,
            })
            .sum()
    }

    /// Positive parts of every relaxed constraint, aggregated the same way
    /// the LP slacks are (pu, or SOC fraction).
    pub fn violations(&self, pt: &Point) -> Vec<Violation> {
        let a = self.assets;
        let net = &a.network;
        let mut out = Vec::new();
        let mut push = |family, unit, step, amount: f64| {
            if amount > 0.0 {
                out.push(Violation { family, unit, step, amount });
            }
        };
        let pm = a.pcc.p_max_kw / self.base;
        let qm = a.pcc.q_max_kvar / self.base;
        for t in 0..self.steps {
            push(ConstraintFamily::PccLimit, 0, t, pt.p_pcc[t].abs() - pm);
            push(ConstraintFamily::PccLimit, 1, t, pt.q_pcc[t].abs() - qm);
            let st = &pt.states[t];
            let worst_v = self
                .others
                .iter()
                .map(|&i| (st.v[i] - net.buses[i].v_max).max(net.buses[i].v_min - st.v[i]))
                .fold(0.0, f64::max);
            push(ConstraintFamily::Voltage, 0, t, worst_v);
            let mut worst_line: f64 = 0.0;
            for (k, br) in net.branches.iter().enumerate() {
                let (f, to) = net.branch_ends(k);
                let (g, b) = self.gb[k];
                for (i, j) in [(f, to), (to, f)] {
                    let e = end_flow_gradient(g, b, st.v[i], st.v[j], st.theta[i] - st.theta[j]);
                    for m in 0..FACETS {
                        let (s, c) = (m as f64 * PI / 4.0).sin_cos();
                        worst_line = worst_line.max(c * e.p + s * e.q - br.limit * (PI / 8.0).cos());
                    }
                }
            }
            push(ConstraintFamily::LineLimit, 0, t, worst_line);
            for (g, dg) in a.dgs.iter().enumerate() {
                let prev = match t {
                    0 => self.prob.dg_prev_kw.as_ref().map(|p| p[g] / self.base),
                    _ => Some(pt.p_dg[g][t - 1]),
                };
                if let Some(prev) = prev {
                    push(ConstraintFamily::Ramp, g, t, (pt.p_dg[g][t] - prev).abs() - dg.ramp_kw / self.base);
                }
            }
            for (e, ess) in a.storage.iter().enumerate() {
                let s = pt.soc[e][t];
                push(ConstraintFamily::StateOfCharge, e, t, (s - ess.soc_max).max(ess.soc_min - s));
            }
        }
        if self.prob.terminal_soc {
            for e in 0..self.n_ess() {
                push(
                    ConstraintFamily::StateOfCharge,
                    e,
                    self.steps,
                    self.prob.initial_soc[e] - pt.soc[e][self.steps - 1],
                );
            }
        }
        out
    }

    /// Runs the trust-region loop from `start`.
    pub fn solve(&self, start: Point) -> Result<(Point, usize, Vec<f64>), DispatchError> {
        let mut x = self.project(start, None)?;
        let mut history = vec![x.merit];
        let mut r = self.opts.initial_radius;
        for iter in 1..=self.opts.max_outer {
            let (cand, lp_obj, step) = self.lp_step(&x, r)?;
            let pred = x.merit - lp_obj;
            if pred <= 1e-9 * (1.0 + x.merit.abs()) || step < self.opts.slp_tol {
                return Ok((x, iter, history));
            }
            match self.project(cand, Some(&x.states)) {
                Ok(trial) if x.merit - trial.merit > 0.0 => {
                    let ratio = (x.merit - trial.merit) / pred;
                    if ratio > 0.75 && step > 0.9 * r {
                        r = (2.0 * r).min(self.opts.max_radius);
                    } else if ratio < 0.25 {
                        r *= 0.5;
                    }
                    x = trial;
                    history.push(x.merit);
                }
                _ => r *= 0.5,
            }
            if r < self.opts.slp_tol {
                return Ok((x, iter, history));
            }
        }
        Err(DispatchError::NonConvergence {
            iterations: self.opts.max_outer,
            last: Box::new(self.to_solution(&x, 0, history)),
        })
    }

    /// Builds and solves the LP around `x` with trust radius `r`. Returns the
    /// candidate setpoints (unprojected), the LP model value and the step
    /// length (∞-norm, pu).
    fn lp_step(&self, x: &Point, r: f64) -> Result<(Point, f64, f64), DispatchError> {
        let a = self.assets;
        let net = &a.network;
        let base = self.base;
        let m = self.others.len();
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let boxed = |lp: &mut Problem, x0: f64, lo: f64, hi: f64| {
            let (l, h) = ((x0 - r).max(lo), (x0 + r).min(hi));
            lp.add_var(0.0, (l.min(h), h))
        };

        let mut dth = Vec::with_capacity(self.steps);
        let mut dv = Vec::with_capacity(self.steps);
        let mut p_dg = vec![Vec::new(); self.n_dg()];
        let mut q_dg = vec![Vec::new(); self.n_dg()];
        let mut p_ch = vec![Vec::new(); self.n_ess()];
        let mut p_dis = vec![Vec::new(); self.n_ess()];
        let mut q_ess = vec![Vec::new(); self.n_ess()];
        let mut soc = vec![Vec::new(); self.n_ess()];
        let mut q_pv = vec![Vec::new(); self.n_pv()];
        let mut p_pcc = Vec::new();
        let mut q_pcc = Vec::new();

        for t in 0..self.steps {
            dth.push((0..m).map(|_| lp.add_var(0.0, (-r, r))).collect::<Vec<_>>());
            dv.push((0..m).map(|_| lp.add_var(0.0, (-r, r))).collect::<Vec<_>>());
            for (g, dg) in a.dgs.iter().enumerate() {
                let on = self.commit[g][t];
                let (pmax, qmax) = if on { (dg.p_max_kw / base, dg.q_max_kvar / base) } else { (0.0, 0.0) };
                let pv = boxed(&mut lp, x.p_dg[g][t], 0.0, pmax);
                q_dg[g].push(boxed(&mut lp, x.q_dg[g][t], 0.0, qmax));
                if on {
                    let f = lp.add_var(dg.fuel_price, (0.0, f64::INFINITY));
                    let x0 = x.p_dg[g][t] * base;
                    let lo = (x0 - r * base).max(0.0);
                    let hi = (x0 + r * base).min(dg.p_max_kw);
                    for xk in tangent_points(lo, x0, hi, self.opts.pwl_segments) {
                        // f ≥ F(xk) + F'(xk) (P − xk), P = base·p
                        let slope = dg.marginal_fuel(xk);
                        lp.add_constraint(
                            [(f, 1.0), (pv, -slope * base)],
                            ComparisonOp::Ge,
                            dg.fuel_l(xk) - slope * xk,
                        );
                    }
                }
                p_dg[g].push(pv);
            }
            for (e, ess) in a.storage.iter().enumerate() {
                let mode = self.prob.mode(e, t);
                let ch_max = if mode == StorageMode::DischargeOnly { 0.0 } else { ess.p_ch_max_kw / base };
                let dis_max = if mode == StorageMode::ChargeOnly { 0.0 } else { ess.p_dis_max_kw / base };
                let c = boxed(&mut lp, x.p_ch[e][t], 0.0, ch_max);
                let d = boxed(&mut lp, x.p_dis[e][t], 0.0, dis_max);
                if ess.p_ch_max_kw > 0.0 && ess.p_dis_max_kw > 0.0 {
                    // convex hull of the binary charge/discharge indicators
                    lp.add_constraint(
                        [(c, base / ess.p_ch_max_kw), (d, base / ess.p_dis_max_kw)],
                        ComparisonOp::Le,
                        1.0,
                    );
                }
                let qm = ess.q_max_kvar / base;
                q_ess[e].push(boxed(&mut lp, x.q_ess[e][t], -qm, qm));
                let s = lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY));
                let k = self.prob.dt_h * base / ess.capacity_kwh;
                let mut expr = vec![(s, 1.0), (c, -k * ess.eta_ch), (d, k / ess.eta_dis)];
                let rhs = if t == 0 {
                    self.prob.initial_soc[e]
                } else {
                    expr.push((soc[e][t - 1], -1.0));
                    0.0
                };
                lp.add_constraint(expr, ComparisonOp::Eq, rhs);
                let sl = lp.add_var(self.w_soc[e], (0.0, f64::INFINITY));
                lp.add_constraint([(s, 1.0), (sl, -1.0)], ComparisonOp::Le, ess.soc_max);
                lp.add_constraint([(s, 1.0), (sl, 1.0)], ComparisonOp::Ge, ess.soc_min);
                p_ch[e].push(c);
                p_dis[e].push(d);
                soc[e].push(s);
            }
            for (k, pv) in a.pv.iter().enumerate() {
                let qm = pv.q_max_kvar / base;
                q_pv[k].push(boxed(&mut lp, x.q_pv[k][t], -qm, qm));
            }
            let pp = lp.add_var(-self.prob.retail_price[t] * base, (f64::NEG_INFINITY, f64::INFINITY));
            let qp = lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY));
            for (var, lim) in [(pp, a.pcc.p_max_kw), (qp, a.pcc.q_max_kvar)] {
                if lim.is_finite() {
                    let sl = lp.add_var(self.w_power, (0.0, f64::INFINITY));
                    lp.add_constraint([(var, 1.0), (sl, -1.0)], ComparisonOp::Le, lim / base);
                    lp.add_constraint([(var, 1.0), (sl, 1.0)], ComparisonOp::Ge, -lim / base);
                }
            }
            p_pcc.push(pp);
            q_pcc.push(qp);
        }

        if self.prob.terminal_soc {
            for e in 0..self.n_ess() {
                let sl = lp.add_var(self.w_soc[e], (0.0, f64::INFINITY));
                lp.add_constraint(
                    [(soc[e][self.steps - 1], 1.0), (sl, 1.0)],
                    ComparisonOp::Ge,
                    self.prob.initial_soc[e],
                );
            }
        }

        for (g, dg) in a.dgs.iter().enumerate() {
            let rr = dg.ramp_kw / base;
            for t in 0..self.steps {
                let (expr, rhs_shift) = match t {
                    0 => match &self.prob.dg_prev_kw {
                        Some(prev) => (vec![(p_dg[g][0], 1.0)], prev[g] / base),
                        None => continue,
                    },
                    _ => (vec![(p_dg[g][t], 1.0), (p_dg[g][t - 1], -1.0)], 0.0),
                };
                let sl = lp.add_var(self.w_power, (0.0, f64::INFINITY));
                let mut up: Vec<_> = expr.clone();
                up.push((sl, -1.0));
                lp.add_constraint(up, ComparisonOp::Le, rr + rhs_shift);
                let mut down: Vec<_> = expr.clone();
                down.push((sl, 1.0));
                lp.add_constraint(down, ComparisonOp::Ge, rhs_shift - rr);
            }
        }

        // linearized network equations
        for t in 0..self.steps {
            let st = &x.states[t];
            let (p0, q0) = bus_injections(&self.y, st);
            let jac = injection_jacobian(&self.y, st);
            let n = net.n_buses();
            for i in 0..n {
                let mut ep = LinearExpr::empty();
                let mut eq = LinearExpr::empty();
                for (c, &k) in self.others.iter().enumerate() {
                    add_nz(&mut ep, dth[t][c], jac.dp_dtheta[(i, k)]);
                    add_nz(&mut ep, dv[t][c], jac.dp_dv[(i, k)]);
                    add_nz(&mut eq, dth[t][c], jac.dq_dtheta[(i, k)]);
                    add_nz(&mut eq, dv[t][c], jac.dq_dv[(i, k)]);
                }
                for (g, &b) in a.dg_bus.iter().enumerate() {
                    if b == i {
                        ep.add(p_dg[g][t], -1.0);
                        eq.add(q_dg[g][t], -1.0);
                    }
                }
                for (e, &b) in a.ess_bus.iter().enumerate() {
                    if b == i {
                        ep.add(p_ch[e][t], 1.0);
                        ep.add(p_dis[e][t], -1.0);
                        eq.add(q_ess[e][t], 1.0);
                    }
                }
                for (k, &b) in a.pv_bus.iter().enumerate() {
                    if b == i {
                        eq.add(q_pv[k][t], -1.0);
                    }
                }
                if i == self.slack {
                    ep.add(p_pcc[t], 1.0);
                    eq.add(q_pcc[t], 1.0);
                }
                lp.add_constraint(ep, ComparisonOp::Eq, self.p_fixed[t][i] - p0[i]);
                lp.add_constraint(eq, ComparisonOp::Eq, self.q_fixed[t][i] - q0[i]);
            }

            if m > 0 {
                let sv = lp.add_var(self.w_power, (0.0, f64::INFINITY));
                for (c, &i) in self.others.iter().enumerate() {
                    let bus = &net.buses[i];
                    lp.add_constraint([(dv[t][c], 1.0), (sv, -1.0)], ComparisonOp::Le, bus.v_max - st.v[i]);
                    lp.add_constraint([(dv[t][c], 1.0), (sv, 1.0)], ComparisonOp::Ge, bus.v_min - st.v[i]);
                }
            }

            if !net.branches.is_empty() {
                let sline = lp.add_var(self.w_power, (0.0, f64::INFINITY));
                let col = |bus: usize| self.others.iter().position(|&o| o == bus);
                for (k, br) in net.branches.iter().enumerate() {
                    let (f, to) = net.branch_ends(k);
                    let (g, b) = self.gb[k];
                    for (i, j) in [(f, to), (to, f)] {
                        let e = end_flow_gradient(g, b, st.v[i], st.v[j], st.theta[i] - st.theta[j]);
                        for mm in 0..FACETS {
                            let (s, c) = (mm as f64 * PI / 4.0).sin_cos();
                            let mut ex = LinearExpr::empty();
                            if let Some(ci) = col(i) {
                                add_nz(&mut ex, dv[t][ci], c * e.dp[0] + s * e.dq[0]);
                                add_nz(&mut ex, dth[t][ci], c * e.dp[2] + s * e.dq[2]);
                            }
                            if let Some(cj) = col(j) {
                                add_nz(&mut ex, dv[t][cj], c * e.dp[1] + s * e.dq[1]);
                                add_nz(&mut ex, dth[t][cj], -(c * e.dp[2] + s * e.dq[2]));
                            }
                            ex.add(sline, -1.0);
                            lp.add_constraint(ex, ComparisonOp::Le, br.limit * (PI / 8.0).cos() - c * e.p - s * e.q);
                        }
                    }
                }
            }
        }

        let sol = lp
            .solve()
            .map_err(|e| DispatchError::Lp(e.to_string()))?
            .into_solution()
            .map_err(|_| DispatchError::Lp("LP solve interrupted".into()))?;
        let mut cand = x.clone();
        let mut step: f64 = 0.0;
        let take = |dst: &mut f64, var: Variable| {
            let v = sol.var_value(var);
            let moved = (v - *dst).abs();
            *dst = v;
            moved
        };
        for t in 0..self.steps {
            for g in 0..self.n_dg() {
                step = step.max(take(&mut cand.p_dg[g][t], p_dg[g][t]));
                step = step.max(take(&mut cand.q_dg[g][t], q_dg[g][t]));
            }
            for e in 0..self.n_ess() {
                step = step.max(take(&mut cand.p_ch[e][t], p_ch[e][t]));
                step = step.max(take(&mut cand.p_dis[e][t], p_dis[e][t]));
                step = step.max(take(&mut cand.q_ess[e][t], q_ess[e][t]));
            }
            for k in 0..self.n_pv() {
                step = step.max(take(&mut cand.q_pv[k][t], q_pv[k][t]));
            }
            for c in 0..m {
                step = step.max(sol.var_value(dth[t][c]).abs()).max(sol.var_value(dv[t][c]).abs());
            }
        }
        Ok((cand, sol.objective(), step))
    }

    /// Converts a projected point to physical units.
    pub fn to_solution(&self, pt: &Point, iterations: usize, merit_history: Vec<f64>) -> DispatchSolution {
        let kw = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            m.iter().map(|row| row.iter().map(|v| v * self.base).collect()).collect()
        };
        let ind = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            m.iter().map(|row| row.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect()).collect()
        };
        DispatchSolution {
            p_dg_kw: kw(&pt.p_dg),
            q_dg_kvar: kw(&pt.q_dg),
            committed: self.commit.to_vec(),
            p_ch_kw: kw(&pt.p_ch),
            p_dis_kw: kw(&pt.p_dis),
            u_ch: ind(&pt.p_ch),
            u_dis: ind(&pt.p_dis),
            q_ess_kvar: kw(&pt.q_ess),
            soc: pt.soc.clone(),
            q_pv_kvar: kw(&pt.q_pv),
            p_pcc_kw: pt.p_pcc.iter().map(|v| v * self.base).collect(),
            q_pcc_kvar: pt.q_pcc.iter().map(|v| v * self.base).collect(),
            states: pt.states.clone(),
            objective: self.cost(pt),
            iterations,
            merit_history,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Violation {
    pub family: ConstraintFamily,
    pub unit: usize,
    pub step: usize,
    pub amount: f64,
}

fn add_nz(e: &mut LinearExpr, v: Variable, c: f64) {
    if c != 0.0 {
        e.add(v, c);
    }
}

/// Points spanning `[lo, hi]` that include `x0`: half of them on each side,
/// or all on one side when the other is empty. Tangents at these points bound
/// the convex fuel curve from below and are exact at the current iterate.
fn tangent_points(lo: f64, x0: f64, hi: f64, segments: usize) -> Vec<f64> {
    let x0 = x0.clamp(lo, hi);
    if hi <= lo {
        return vec![lo];
    }
    let (left, right) = match (x0 > lo, hi > x0) {
        (true, true) => (segments / 2, segments - segments / 2),
        (true, false) => (segments, 0),
        _ => (0, segments),
    };
    let mut pts = Vec::with_capacity(segments + 1);
    for k in 0..left {
        pts.push(lo + (x0 - lo) * k as f64 / left as f64);
    }
    pts.push(x0);
    for k in 1..=right {
        pts.push(if k == right { hi } else { x0 + (hi - x0) * k as f64 / right as f64 });
    }
    pts
}
