//! Newton-Raphson power flow in polar coordinates.

use nalgebra::{DMatrix, DVector};

use super::{build_admittance, AdmittanceMatrix, BusState, GridError, InjectionSet, NetworkModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFlowOptions {
    /// Largest acceptable active/reactive mismatch (pu).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        PowerFlowOptions { tol: 1e-8, max_iter: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub state: BusState,
    /// Active power injected by the slack bus into the network (pu).
    pub slack_p: f64,
    /// Reactive power injected by the slack bus into the network (pu).
    pub slack_q: f64,
    pub iterations: usize,
    pub max_mismatch: f64,
}

/// Computed injections `P_i(V, θ)`, `Q_i(V, θ)` for every bus.
pub fn bus_injections(y: &AdmittanceMatrix, state: &BusState) -> (Vec<f64>, Vec<f64>) {
    let n = y.dim();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let (mut pi, mut qi) = (0.0, 0.0);
        for j in 0..n {
            let (gij, bij) = (y.g[(i, j)], y.b[(i, j)]);
            if gij == 0.0 && bij == 0.0 {
                continue;
            }
            let (s, c) = (state.theta[i] - state.theta[j]).sin_cos();
            pi += state.v[j] * (gij * c + bij * s);
            qi += state.v[j] * (gij * s - bij * c);
        }
        p[i] = state.v[i] * pi;
        q[i] = state.v[i] * qi;
    }
    (p, q)
}

/// Full partial derivatives of the bus injections with respect to every
/// bus angle and magnitude (slack included). Row `i` is bus `i`.
#[derive(Debug, Clone)]
pub struct InjectionJacobian {
    pub dp_dtheta: DMatrix<f64>,
    pub dp_dv: DMatrix<f64>,
    pub dq_dtheta: DMatrix<f64>,
    pub dq_dv: DMatrix<f64>,
}

pub fn injection_jacobian(y: &AdmittanceMatrix, state: &BusState) -> InjectionJacobian {
    let n = y.dim();
    let (p, q) = bus_injections(y, state);
    let mut jac = InjectionJacobian {
        dp_dtheta: DMatrix::zeros(n, n),
        dp_dv: DMatrix::zeros(n, n),
        dq_dtheta: DMatrix::zeros(n, n),
        dq_dv: DMatrix::zeros(n, n),
    };
    let v = &state.v;
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let (gik, bik) = (y.g[(i, k)], y.b[(i, k)]);
            if gik == 0.0 && bik == 0.0 {
                continue;
            }
            let (s, c) = (state.theta[i] - state.theta[k]).sin_cos();
            let a = gik * s - bik * c;
            let b = gik * c + bik * s;
            jac.dp_dtheta[(i, k)] = v[i] * v[k] * a;
            jac.dp_dv[(i, k)] = v[i] * b;
            jac.dq_dtheta[(i, k)] = -v[i] * v[k] * b;
            jac.dq_dv[(i, k)] = v[i] * a;
        }
        let (gii, bii) = (y.g[(i, i)], y.b[(i, i)]);
        jac.dp_dtheta[(i, i)] = -q[i] - bii * v[i] * v[i];
        jac.dp_dv[(i, i)] = p[i] / v[i] + gii * v[i];
        jac.dq_dtheta[(i, i)] = p[i] - gii * v[i] * v[i];
        jac.dq_dv[(i, i)] = q[i] / v[i] - bii * v[i];
    }
    jac
}

/// Solves the power flow with default options from a flat start.
pub fn solve_power_flow(
    network: &NetworkModel,
    injections: &InjectionSet,
    slack_voltage: f64,
) -> Result<PowerFlowSolution, GridError> {
    let y = build_admittance(network);
    solve_power_flow_with(network, &y, injections, slack_voltage, &PowerFlowOptions::default(), None)
}

/// Solves the power flow with a precomputed admittance matrix and an optional
/// warm start. All non-slack buses are PQ buses.
pub fn solve_power_flow_with(
    network: &NetworkModel,
    y: &AdmittanceMatrix,
    injections: &InjectionSet,
    slack_voltage: f64,
    opts: &PowerFlowOptions,
    warm: Option<&BusState>,
) -> Result<PowerFlowSolution, GridError> {
    let n = network.n_buses();
    if injections.p.len() != n {
        return Err(GridError::Dimension { expected: n, got: injections.p.len() });
    }
    if injections.q.len() != n {
        return Err(GridError::Dimension { expected: n, got: injections.q.len() });
    }
    if !(0.5..=1.5).contains(&slack_voltage) {
        return Err(GridError::SlackVoltage(slack_voltage));
    }
    let slack = network.slack_index();
    let mut state = match warm {
        Some(s) if s.v.len() == n => s.clone(),
        _ => BusState::flat(n, slack, slack_voltage),
    };
    state.v[slack] = slack_voltage;
    state.theta[slack] = 0.0;

    // unknown ordering: theta of non-slack buses, then V of non-slack buses
    let others: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let m = others.len();

    let mut last_residual = f64::INFINITY;
    for iter in 0..=opts.max_iter {
        let (p, q) = bus_injections(y, &state);
        let mut mismatch = DVector::zeros(2 * m);
        for (r, &i) in others.iter().enumerate() {
            mismatch[r] = injections.p[i] - p[i];
            mismatch[m + r] = injections.q[i] - q[i];
        }
        let residual = mismatch.amax();
        if !residual.is_finite() {
            return Err(GridError::Divergence { iterations: iter, residual: last_residual });
        }
        last_residual = residual;
        if residual <= opts.tol {
            return Ok(PowerFlowSolution {
                slack_p: p[slack],
                slack_q: q[slack],
                state,
                iterations: iter,
                max_mismatch: residual,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let jac = injection_jacobian(y, &state);
        let mut j = DMatrix::zeros(2 * m, 2 * m);
        for (r, &i) in others.iter().enumerate() {
            for (c, &k) in others.iter().enumerate() {
                j[(r, c)] = jac.dp_dtheta[(i, k)];
                j[(r, m + c)] = jac.dp_dv[(i, k)];
                j[(m + r, c)] = jac.dq_dtheta[(i, k)];
                j[(m + r, m + c)] = jac.dq_dv[(i, k)];
            }
        }
        let dx = j.lu().solve(&mismatch).ok_or(GridError::Divergence { iterations: iter, residual })?;
        for (r, &i) in others.iter().enumerate() {
            state.theta[i] += dx[r];
            state.v[i] += dx[m + r];
        }
    }
    Err(GridError::Divergence { iterations: opts.max_iter, residual: last_residual })
}
