use nalgebra::DMatrix;

use super::NetworkModel;

/// Bus admittance matrix `Y = G + jB` kept as its real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl AdmittanceMatrix {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

/// Series admittance `1 / (r + jx)` as `(g, b)`.
pub(crate) fn series_admittance(r: f64, x: f64) -> (f64, f64) {
    let z2 = r * r + x * x;
    (r / z2, -x / z2)
}

/// Assembles the bus admittance matrix. No shunts are modelled, so every row
/// sums to zero.
///
/// Connectivity and impedance checks happen when the `NetworkModel` is
/// constructed, so this cannot fail.
pub fn build_admittance(network: &NetworkModel) -> AdmittanceMatrix {
    let n = network.n_buses();
    let mut g = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for (k, br) in network.branches.iter().enumerate() {
        let (i, j) = network.branch_ends(k);
        let (gs, bs) = series_admittance(br.r, br.x);
        g[(i, i)] += gs;
        g[(j, j)] += gs;
        g[(i, j)] -= gs;
        g[(j, i)] -= gs;
        b[(i, i)] += bs;
        b[(j, j)] += bs;
        b[(i, j)] -= bs;
        b[(j, i)] -= bs;
    }
    AdmittanceMatrix { g, b }
}
