//! Regularized recursive least squares with exponential forgetting.

use nalgebra::{DMatrix, DVector};

use super::{RlError, ValueModel};

/// Internal state of the RLS estimator.
///
/// The auxiliary matrix `Δ` is kept in information form, `Δ⁻¹`. The
/// covariance-form rank-one downdate cancels catastrophically when `δ₀` is
/// large, while the information form only ever adds positive terms. The two
/// are algebraically identical: the downdate becomes `Δ⁻¹ + x xᵀ`, the
/// forgetting inflation a factor `1−φ`, and the `(I + μΔ̂)⁻¹` rescale an
/// additive `μI`.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    info: DMatrix<f64>,
    /// Forgetting factor `φ ∈ [0, 1)`.
    pub phi: f64,
    /// Regularization factor `μ ≥ 0`.
    pub mu: f64,
    /// Scale of the initial (and reset) matrix `Δ = δ₀·I`.
    pub delta_init: f64,
}

impl RlsState {
    pub fn new(dim: usize, phi: f64, mu: f64, delta_init: f64) -> Result<Self, RlError> {
        if !(0.0..1.0).contains(&phi) {
            return Err(RlError::Invalid(format!("forgetting factor {phi} outside [0, 1)")));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(RlError::Invalid(format!("regularization factor {mu} must be >= 0")));
        }
        if !(delta_init > 0.0) || !delta_init.is_finite() {
            return Err(RlError::Invalid(format!("initial scale {delta_init} must be > 0")));
        }
        Ok(RlsState { info: DMatrix::identity(dim, dim) / delta_init, phi, mu, delta_init })
    }

    /// Restores a state from a stored information matrix `Δ⁻¹`.
    pub fn from_information(info: DMatrix<f64>, phi: f64, mu: f64, delta_init: f64) -> Result<Self, RlError> {
        let mut s = RlsState::new(info.nrows(), phi, mu, delta_init)?;
        if !info.is_square() {
            return Err(RlError::Dimension { what: "information matrix", expected: info.nrows(), got: info.ncols() });
        }
        s.info = info;
        if !s.is_positive_definite() {
            return Err(RlError::Invalid("information matrix is not positive definite".into()));
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.info.nrows()
    }

    /// `Δ⁻¹`.
    pub fn information(&self) -> &DMatrix<f64> {
        &self.info
    }

    /// `Δ`, recomputed from the information form.
    pub fn delta(&self) -> DMatrix<f64> {
        match self.info.clone().cholesky() {
            Some(c) => c.inverse(),
            None => DMatrix::from_element(self.dim(), self.dim(), f64::NAN),
        }
    }

    pub fn reset(&mut self) {
        let d = self.dim();
        self.info = DMatrix::identity(d, d) / self.delta_init;
    }

    pub fn is_positive_definite(&self) -> bool {
        self.info.iter().all(|v| v.is_finite()) && self.info.clone().cholesky().is_some()
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.info - self.info.transpose()).amax()
    }
}

/// Outcome of one training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsStep {
    /// Prediction before the update.
    pub prediction: f64,
    /// `R − Q̂`.
    pub innovation: f64,
    /// Set when positive definiteness was lost and `Δ` was reset.
    pub reset: bool,
}

/// One RLS update of `θ` and `Δ` from the features `x` and target `R`.
///
/// `Δ` is down-dated by the rank-one term and inflated by `1/(1−φ)`, then
/// rescaled by `(I + μΔ̂)⁻¹`; finally `θ ← θ + Δ x (R − Q̂)` with the updated
/// `Δ`. Loss of positive definiteness resets `Δ` to `δ₀·I`.
pub fn rls_update(
    model: &mut ValueModel,
    rls: &mut RlsState,
    x: &DVector<f64>,
    target: f64,
) -> Result<RlsStep, RlError> {
    let d = model.dim();
    if x.len() != d || rls.dim() != d {
        return Err(RlError::Dimension { what: "rls features", expected: d, got: x.len().max(rls.dim()) });
    }
    let prediction = model.predict(x);
    let innovation = target - prediction;

    let mut next = (&rls.info + x * x.transpose()) * (1.0 - rls.phi);
    for i in 0..d {
        next[(i, i)] += rls.mu;
    }
    symmetrize(&mut next);
    rls.info = next;

    let mut reset = false;
    let chol = match rls.info.iter().all(|v| v.is_finite()).then(|| rls.info.clone().cholesky()).flatten() {
        Some(c) => c,
        None => {
            log::warn!("RLS matrix lost positive definiteness; resetting to {}·I", rls.delta_init);
            reset = true;
            rls.reset();
            rls.info.clone().cholesky().expect("scaled identity is positive definite")
        }
    };
    if innovation.is_finite() && x.iter().all(|v| v.is_finite()) {
        model.theta += chol.solve(x) * innovation;
    }
    Ok(RlsStep { prediction, innovation, reset })
}

/// Plain stochastic-gradient step `θ ← θ + δ (R − Q̂) x`, kept for ablations.
pub fn sgd_update(model: &mut ValueModel, x: &DVector<f64>, target: f64, step: f64) -> Result<RlsStep, RlError> {
    if x.len() != model.dim() {
        return Err(RlError::Dimension { what: "sgd features", expected: model.dim(), got: x.len() });
    }
    let prediction = model.predict(x);
    let innovation = target - prediction;
    model.theta += x * (step * innovation);
    Ok(RlsStep { prediction, innovation, reset: false })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
