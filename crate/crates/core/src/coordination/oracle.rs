use rand::Rng;

use super::episode::welfare_of;
use super::{fixed_point_exchange, CoordinationError, ExchangeOutcome, Settings, System};
use crate::rl::{
    compute_reward, q_value, sample_state, select_action_optimal, ActionVector, PriceBounds, StateVector, ValueModel,
};

#[derive(Debug, Clone, PartialEq)]
pub struct WelfareEvaluation {
    pub welfare: f64,
    /// Discounted agent reward of the same exchange.
    pub reward: f64,
    pub outcome: ExchangeOutcome,
}

/// Welfare of `action` on the window at `start`, with every microgrid
/// dispatching against the true load and irradiance.
pub fn evaluate_welfare(
    system: &System,
    start: usize,
    episode: usize,
    action: &ActionVector,
    settings: &Settings,
) -> Result<WelfareEvaluation, CoordinationError> {
    let inputs = system.window(start, settings.window_steps, episode);
    let outcome = fixed_point_exchange(system, &inputs, action, None, settings)?;
    let welfare = welfare_of(&inputs.wholesale_price, action, &outcome)?;
    let reward = compute_reward(
        &inputs.wholesale_price,
        &outcome.p_w_kw,
        &action.prices,
        &outcome.pcc_kw(),
        settings.hyper.gamma,
    )?;
    Ok(WelfareEvaluation { welfare, reward, outcome })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    /// The agent's estimate of the window.
    pub state: StateVector,
    pub action: ActionVector,
    /// Value the model predicts for `action`.
    pub q_hat: f64,
    pub evaluation: WelfareEvaluation,
}

/// Greedy action of a trained model on the window at `start`, scored by
/// [`evaluate_welfare`]. The agent sees an estimated state drawn from `rng`.
pub fn evaluate_policy<R: Rng + ?Sized>(
    system: &System,
    model: &ValueModel,
    start: usize,
    episode: usize,
    settings: &Settings,
    rng: &mut R,
) -> Result<PolicyEvaluation, CoordinationError> {
    let inputs = system.window(start, settings.window_steps, episode);
    let state = sample_state(&inputs.truth_state(), settings.estimation, rng);
    let action = select_action_optimal(model, &state, &settings.bounds);
    let q_hat = q_value(model, &state, &action)?;
    let evaluation = evaluate_welfare(system, start, episode, &action, settings)?;
    Ok(PolicyEvaluation { state, action, q_hat, evaluation })
}

/// `points` evenly spaced prices from `min` to `max`; a single point sits at
/// `min`.
pub fn price_grid(bounds: &PriceBounds, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![bounds.min],
        _ => (0..points).map(|k| bounds.min + (bounds.max - bounds.min) * k as f64 / (points - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub action: ActionVector,
    pub welfare: f64,
    pub evaluations: usize,
    /// Welfare of every grid action in enumeration order (last price
    /// index varies fastest, over `[mg][step]` in row-major order).
    pub welfares: Vec<f64>,
}

/// Exhaustive search of the price grid for the welfare-maximizing action.
pub fn centralized_oracle(
    system: &System,
    start: usize,
    episode: usize,
    settings: &Settings,
) -> Result<OracleResult, CoordinationError> {
    let points = settings.oracle_grid_points;
    let dims = system.n_mgs() * settings.window_steps;
    let limit = settings.oracle_max_evaluations;
    let count = (points as u64).checked_pow(dims as u32).filter(|&c| c <= limit);
    let Some(count) = count else {
        return Err(CoordinationError::OracleGuard { points, dims, limit });
    };
    if count == 0 {
        return Err(CoordinationError::Invalid("oracle grid has no points".into()));
    }
    let grid = price_grid(&settings.bounds, points);
    let steps = settings.window_steps;
    let mut digits = vec![0usize; dims];
    let mut best: Option<(f64, ActionVector)> = None;
    let mut welfares = Vec::with_capacity(count as usize);
    loop {
        let prices = (0..system.n_mgs()).map(|mg| (0..steps).map(|t| grid[digits[mg * steps + t]]).collect()).collect();
        let action = ActionVector { prices };
        let w = evaluate_welfare(system, start, episode, &action, settings)?.welfare;
        welfares.push(w);
        if best.as_ref().is_none_or(|(bw, _)| w > *bw) {
            best = Some((w, action));
        }
        // odometer increment, last digit fastest
        let mut k = dims;
        loop {
            if k == 0 {
                let (welfare, action) = best.expect("at least one evaluation");
                return Ok(OracleResult { action, welfare, evaluations: welfares.len(), welfares });
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < points {
                break;
            }
            digits[k] = 0;
        }
    }
}

/// Splits the cooperative's revenue among microgrids in proportion to each
/// one's absolute PCC energy; an even split when all energies are zero.
pub fn allocate_revenue(revenue: f64, pcc_energy_kwh: &[f64]) -> Result<Vec<f64>, CoordinationError> {
    if !revenue.is_finite() {
        return Err(CoordinationError::Invalid(format!("revenue {revenue} is not finite")));
    }
    if pcc_energy_kwh.is_empty() {
        return Err(CoordinationError::Invalid("no microgrids to allocate to".into()));
    }
    if pcc_energy_kwh.iter().any(|e| !e.is_finite()) {
        return Err(CoordinationError::Invalid("PCC energies must be finite".into()));
    }
    let total: f64 = pcc_energy_kwh.iter().map(|e| e.abs()).sum();
    let n = pcc_energy_kwh.len() as f64;
    Ok(pcc_energy_kwh.iter().map(|e| if total > 0.0 { revenue * e.abs() / total } else { revenue / n }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pro_rata_split() {
        assert_eq!(allocate_revenue(8.0, &[10.0, 30.0]).unwrap(), vec![2.0, 6.0]);
        assert_eq!(allocate_revenue(5.0, &[-3.0]).unwrap(), vec![5.0]);
    }

    #[test]
    fn zero_energy_splits_evenly() {
        assert_eq!(allocate_revenue(9.0, &[0.0, 0.0, 0.0]).unwrap(), vec![3.0; 3]);
    }

    #[test]
    fn non_finite_revenue_rejected() {
        assert!(allocate_revenue(f64::NAN, &[1.0]).is_err());
    }

    #[test]
    fn grid_spans_the_bounds() {
        let g = price_grid(&PriceBounds { min: 0.2, max: 0.3 }, 6);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], 0.2);
        assert_eq!(g[5], 0.3);
    }
}
