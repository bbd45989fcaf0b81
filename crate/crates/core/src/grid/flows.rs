use super::admittance::series_admittance;
use super::{BusState, GridError, NetworkModel};

/// Sending-end and receiving-end flows of one branch, pu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchFlow {
    /// Flow leaving the from-bus towards the to-bus.
    pub p_from: f64,
    pub q_from: f64,
    /// Flow leaving the to-bus towards the from-bus.
    pub p_to: f64,
    pub q_to: f64,
}

impl BranchFlow {
    pub fn loss_p(&self) -> f64 {
        self.p_from + self.p_to
    }
}

/// Branch flow at end `i` of a branch with series admittance `g + jb`.
fn end_flow(g: f64, b: f64, vi: f64, vj: f64, dtheta: f64) -> (f64, f64) {
    let (s, c) = dtheta.sin_cos();
    let p = vi * (vi * g - vj * (g * c + b * s));
    let q = -vi * (vi * b + vj * (g * s - b * c));
    (p, q)
}

/// Flow at end `i` of a branch together with its partial derivatives with
/// respect to `(V_i, V_j, θ_i)`. The `θ_j` derivatives are the negated `θ_i`
/// ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EndFlowGradient {
    pub p: f64,
    pub q: f64,
    pub dp: [f64; 3],
    pub dq: [f64; 3],
}

pub(crate) fn end_flow_gradient(g: f64, b: f64, vi: f64, vj: f64, dtheta: f64) -> EndFlowGradient {
    let (s, c) = dtheta.sin_cos();
    let (p, q) = end_flow(g, b, vi, vj, dtheta);
    let gc_bs = g * c + b * s;
    let gs_bc = g * s - b * c;
    EndFlowGradient {
        p,
        q,
        dp: [2.0 * vi * g - vj * gc_bs, -vi * gc_bs, vi * vj * gs_bc],
        dq: [-2.0 * vi * b - vj * gs_bc, -vi * gs_bc, -vi * vj * gc_bs],
    }
}

/// Active and reactive flow on every branch for a given bus state.
pub fn line_flows(network: &NetworkModel, state: &BusState) -> Result<Vec<BranchFlow>, GridError> {
    let n = network.n_buses();
    if state.v.len() != n || state.theta.len() != n {
        return Err(GridError::Dimension { expected: n, got: state.v.len().min(state.theta.len()) });
    }
    Ok(network
        .branches
        .iter()
        .enumerate()
        .map(|(k, br)| {
            let (i, j) = network.branch_ends(k);
            let (g, b) = series_admittance(br.r, br.x);
            let dt = state.theta[i] - state.theta[j];
            let (p_from, q_from) = end_flow(g, b, state.v[i], state.v[j], dt);
            let (p_to, q_to) = end_flow(g, b, state.v[j], state.v[i], -dt);
            BranchFlow { p_from, q_from, p_to, q_to }
        })
        .collect())
}
