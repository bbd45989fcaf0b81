//! Oracles for the value-function learner: batch least squares via normal
//! equations, a term-by-term evaluation of the bilinear value function, and a
//! dense price-grid argmax.

use nalgebra::{DMatrix, DVector};

/// `θ = (XᵀX)⁻¹ Xᵀy` solved with a Cholesky factorization of the normal
/// equations. Rows of `xs` are samples.
pub fn batch_least_squares(xs: &[DVector<f64>], ys: &[f64]) -> DVector<f64> {
    let d = xs[0].len();
    let mut xtx = DMatrix::<f64>::zeros(d, d);
    let mut xty = DVector::<f64>::zeros(d);
    for (x, y) in xs.iter().zip(ys) {
        for i in 0..d {
            xty[i] += x[i] * y;
            for j in 0..d {
                xtx[(i, j)] += x[i] * x[j];
            }
        }
    }
    xtx.cholesky().expect("design matrix has full column rank").solve(&xty)
}

/// Bilinear value `Σ_n Σ_t (θ1 λI + θ2 λP + θ3 I + θ4 P + θ5 λ) + θ6`,
/// written directly from the per-term definitions.
pub fn q_terms(theta: &[f64], irr: &[Vec<f64>], load: &[Vec<f64>], price: &[Vec<f64>]) -> f64 {
    let n = irr.len();
    let mut q = theta[5 * n];
    for mg in 0..n {
        let th = &theta[5 * mg..5 * mg + 5];
        for t in 0..irr[mg].len() {
            let (i, p, l) = (irr[mg][t], load[mg][t], price[mg][t]);
            q += th[0] * l * i;
            q += th[1] * l * p;
            q += th[2] * i;
            q += th[3] * p;
            q += th[4] * l;
        }
    }
    q
}

/// `points`-point uniform grid over `[lo, hi]` with the endpoints exact.
pub fn price_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| if k + 1 == points { hi } else { lo + (hi - lo) * k as f64 / (points - 1) as f64 }).collect()
}
