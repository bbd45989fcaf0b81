use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};

use super::RlError;

/// What the cooperative agent believes about each microgrid over the decision
/// window: aggregate normalized irradiance and aggregate active load.
///
/// Indexed `[mg][step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub irradiance: Vec<Vec<f64>>,
    pub load_kw: Vec<Vec<f64>>,
}

impl StateVector {
    pub fn new(irradiance: Vec<Vec<f64>>, load_kw: Vec<Vec<f64>>) -> Result<Self, RlError> {
        let s = StateVector { irradiance, load_kw };
        s.validate()?;
        Ok(s)
    }

    pub fn zeros(n_mgs: usize, steps: usize) -> Self {
        StateVector { irradiance: vec![vec![0.0; steps]; n_mgs], load_kw: vec![vec![0.0; steps]; n_mgs] }
    }

    pub fn n_mgs(&self) -> usize {
        self.irradiance.len()
    }

    pub fn steps(&self) -> usize {
        self.irradiance.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<(), RlError> {
        if self.load_kw.len() != self.irradiance.len() {
            return Err(RlError::Dimension {
                what: "load rows",
                expected: self.irradiance.len(),
                got: self.load_kw.len(),
            });
        }
        let t = self.steps();
        for (irr, load) in self.irradiance.iter().zip(&self.load_kw) {
            if irr.len() != t || load.len() != t {
                return Err(RlError::Dimension { what: "window steps", expected: t, got: irr.len().max(load.len()) });
            }
            if irr.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(RlError::Invalid("irradiance estimate outside [0, 1]".into()));
            }
            if load.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(RlError::Invalid("negative or non-finite load estimate".into()));
            }
        }
        Ok(())
    }
}

/// Standard deviations of the agent's estimation errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationError {
    /// Irradiance error (normalized units).
    pub e_pv: f64,
    /// Load error (kW).
    pub e_d: f64,
}

/// Beta shape parameters built from the aggregate irradiance truth and the
/// irradiance error. `None` when they degenerate (truth at 0 or 1, or a
/// non-positive shape).
pub fn beta_shapes(truth: f64, e_pv: f64) -> Option<(f64, f64)> {
    if !(truth > 0.0 && truth < 1.0) || !(e_pv > 0.0) {
        return None;
    }
    let beta = (1.0 - truth) * (truth * (1.0 + truth) / (e_pv * e_pv) - 1.0);
    let alpha = beta * truth / (1.0 - truth);
    (alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()).then_some((alpha, beta))
}

/// Draws the agent's noisy view of the window from the true aggregates.
///
/// Irradiance comes from a beta distribution whose mean equals the truth;
/// load comes from a normal distribution centred on the truth, truncated at
/// zero by rejection. Degenerate inputs (irradiance at 0 or 1, zero error)
/// return the truth unchanged.
pub fn sample_state<R: Rng + ?Sized>(truth: &StateVector, err: EstimationError, rng: &mut R) -> StateVector {
    let irradiance = truth
        .irradiance
        .iter()
        .map(|row| {
            row.iter()
                .map(|&i| match beta_shapes(i, err.e_pv) {
                    Some((a, b)) => Beta::new(a, b).map(|d| d.sample(rng)).unwrap_or(i),
                    None => i,
                })
                .collect()
        })
        .collect();
    let load_kw =
        truth.load_kw.iter().map(|row| row.iter().map(|&p| truncated_normal(p, err.e_d, rng)).collect()).collect();
    StateVector { irradiance, load_kw }
}

fn truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    if !(sd > 0.0) {
        return mean.max(0.0);
    }
    let Ok(dist) = Normal::new(mean, sd) else {
        return mean.max(0.0);
    };
    for _ in 0..1000 {
        let x = dist.sample(rng);
        if x >= 0.0 {
            return x;
        }
    }
    0.0
}
