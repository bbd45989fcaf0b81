use rand::Rng;

use super::{ActionVector, PriceBounds, StateVector, ValueModel};

/// Coefficient of `λ_{n,t}` in `Q̂` for the given state.
pub fn price_coefficient(model: &ValueModel, state: &StateVector, mg: usize, step: usize) -> f64 {
    model.coeff(1, mg) * state.irradiance[mg][step] + model.coeff(2, mg) * state.load_kw[mg][step] + model.coeff(5, mg)
}

/// Exact maximiser of `Q̂(S, ·)` over the price box.
///
/// `Q̂` is linear in every price, so each price sits at the upper bound when
/// its coefficient is positive and at the lower bound otherwise (ties go to
/// the lower bound).
pub fn select_action_optimal(model: &ValueModel, state: &StateVector, bounds: &PriceBounds) -> ActionVector {
    let prices = (0..state.n_mgs())
        .map(|mg| {
            (0..state.steps())
                .map(|t| if price_coefficient(model, state, mg, t) > 0.0 { bounds.max } else { bounds.min })
                .collect()
        })
        .collect();
    ActionVector { prices }
}

/// ε-greedy selection. Returns the action and whether it was exploratory.
///
/// A uniform `r` is always drawn; when `r < ε` every price is drawn uniformly
/// from the bounds, otherwise the greedy action is returned.
pub fn select_action_eps_greedy<R: Rng + ?Sized>(
    model: &ValueModel,
    state: &StateVector,
    bounds: &PriceBounds,
    epsilon: f64,
    rng: &mut R,
) -> (ActionVector, bool) {
    let r: f64 = rng.random();
    if r >= epsilon {
        return (select_action_optimal(model, state, bounds), false);
    }
    let prices = (0..state.n_mgs())
        .map(|_| (0..state.steps()).map(|_| rng.random_range(bounds.min..=bounds.max)).collect())
        .collect();
    (ActionVector { prices }, true)
}
