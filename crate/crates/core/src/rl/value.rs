use nalgebra::DVector;

use super::{RlError, StateVector};

/// Retail price bounds `[min, max]` in $/kWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceBounds {
    pub min: f64,
    pub max: f64,
}

impl PriceBounds {
    pub fn new(min: f64, max: f64) -> Result<Self, RlError> {
        if !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(RlError::Invalid(format!("price bounds [{min}, {max}] must satisfy min < max")));
        }
        Ok(PriceBounds { min, max })
    }

    pub fn contains(&self, p: f64) -> bool {
        (self.min..=self.max).contains(&p)
    }
}

/// Locational retail prices, indexed `[mg][step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector {
    pub prices: Vec<Vec<f64>>,
}

impl ActionVector {
    pub fn uniform(n_mgs: usize, steps: usize, price: f64) -> Self {
        ActionVector { prices: vec![vec![price; steps]; n_mgs] }
    }

    pub fn within(&self, bounds: &PriceBounds) -> bool {
        self.prices.iter().flatten().all(|p| bounds.contains(*p))
    }

    /// Window-mean price of each microgrid.
    pub fn mean_prices(&self) -> Vec<f64> {
        self.prices.iter().map(|r| r.iter().sum::<f64>() / r.len().max(1) as f64).collect()
    }
}

/// Number of regression features for `n_mgs` microgrids.
pub const fn feature_dim(n_mgs: usize) -> usize {
    5 * n_mgs + 1
}

/// Regression features of the bilinear state-action value function.
///
/// Layout: for each microgrid `n`, five entries
/// `[Σ λ·I, Σ λ·P, Σ I, Σ P, Σ λ]` summed over the window steps, followed by a
/// single constant `1`.
pub fn feature_map(state: &StateVector, action: &ActionVector) -> Result<DVector<f64>, RlError> {
    let n = state.n_mgs();
    if action.prices.len() != n {
        return Err(RlError::Dimension { what: "action microgrids", expected: n, got: action.prices.len() });
    }
    let mut x = DVector::zeros(feature_dim(n));
    for mg in 0..n {
        let (irr, load, price) = (&state.irradiance[mg], &state.load_kw[mg], &action.prices[mg]);
        if price.len() != irr.len() {
            return Err(RlError::Dimension { what: "action steps", expected: irr.len(), got: price.len() });
        }
        let base = 5 * mg;
        for t in 0..irr.len() {
            x[base] += price[t] * irr[t];
            x[base + 1] += price[t] * load[t];
            x[base + 2] += irr[t];
            x[base + 3] += load[t];
            x[base + 4] += price[t];
        }
    }
    x[5 * n] = 1.0;
    Ok(x)
}

/// Parameters `θ` of the approximate state-action value function.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueModel {
    n_mgs: usize,
    pub theta: DVector<f64>,
}

impl ValueModel {
    pub fn zeros(n_mgs: usize) -> Self {
        ValueModel { n_mgs, theta: DVector::zeros(feature_dim(n_mgs)) }
    }

    pub fn from_theta(n_mgs: usize, theta: DVector<f64>) -> Result<Self, RlError> {
        if theta.len() != feature_dim(n_mgs) {
            return Err(RlError::Dimension { what: "theta", expected: feature_dim(n_mgs), got: theta.len() });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(RlError::Invalid("theta has non-finite entries".into()));
        }
        Ok(ValueModel { n_mgs, theta })
    }

    pub fn n_mgs(&self) -> usize {
        self.n_mgs
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Coefficient `θᵏ_n` for `k` in 1..=5.
    pub fn coeff(&self, k: usize, mg: usize) -> f64 {
        debug_assert!((1..=5).contains(&k));
        self.theta[5 * mg + k - 1]
    }

    pub fn bias(&self) -> f64 {
        self.theta[5 * self.n_mgs]
    }

    pub fn predict(&self, x: &DVector<f64>) -> f64 {
        self.theta.dot(x)
    }
}

/// `Q̂(S, a | θ)`.
pub fn q_value(model: &ValueModel, state: &StateVector, action: &ActionVector) -> Result<f64, RlError> {
    if state.n_mgs() != model.n_mgs() {
        return Err(RlError::Dimension { what: "state microgrids", expected: model.n_mgs(), got: state.n_mgs() });
    }
    Ok(model.predict(&feature_map(state, action)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_inputs_leave_only_bias() {
        let x = feature_map(&StateVector::zeros(2, 3), &ActionVector::uniform(2, 3, 0.0)).unwrap();
        let mut expect = DVector::zeros(11);
        expect[10] = 1.0;
        assert_eq!(x, expect);
    }

    #[test]
    fn single_step_substitution() {
        let s = StateVector::new(vec![vec![0.5]], vec![vec![100.0]]).unwrap();
        let a = ActionVector { prices: vec![vec![0.2]] };
        let x = feature_map(&s, &a).unwrap();
        let expect = [0.1, 20.0, 0.5, 100.0, 0.2, 1.0];
        for (got, want) in x.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bias_only_model() {
        let mut m = ValueModel::zeros(1);
        m.theta[5] = 7.0;
        let s = StateVector::new(vec![vec![0.3, 0.9]], vec![vec![50.0, 10.0]]).unwrap();
        let a = ActionVector { prices: vec![vec![0.1, 0.4]] };
        assert_eq!(q_value(&m, &s, &a).unwrap(), 7.0);
        assert_eq!(q_value(&ValueModel::zeros(1), &s, &a).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_dimensions() {
        let s = StateVector::zeros(2, 3);
        assert!(feature_map(&s, &ActionVector::uniform(1, 3, 0.1)).is_err());
        assert!(feature_map(&s, &ActionVector::uniform(2, 2, 0.1)).is_err());
        assert!(q_value(&ValueModel::zeros(3), &s, &ActionVector::uniform(2, 3, 0.1)).is_err());
    }
}
