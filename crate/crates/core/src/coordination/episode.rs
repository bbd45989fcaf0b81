use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{fixed_point_exchange, CoordinationError, ExchangeOutcome, Settings, System};
use crate::rl::{
    compute_reward, feature_map, rls_update, sample_state, select_action_eps_greedy, sgd_update, ActionVector,
    RlsState, StateVector, ValueModel,
};
use crate::scenario::{EpisodeLogRow, LearningRule};

/// Denominator floor of the absolute percentage error.
pub const APE_FLOOR: f64 = 1e-6;

/// The agent's learnable state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState {
    pub model: ValueModel,
    pub rls: RlsState,
}

impl TrainingState {
    pub fn new(n_mgs: usize, settings: &Settings) -> Result<Self, CoordinationError> {
        let model = ValueModel::zeros(n_mgs);
        let rls = RlsState::new(model.dim(), settings.hyper.phi, settings.hyper.mu, settings.delta_init)?;
        Ok(TrainingState { model, rls })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub window_start: usize,
    /// The agent's estimate of the window.
    pub state: StateVector,
    pub action: ActionVector,
    /// Whether the action was a random exploration draw.
    pub explored: bool,
    pub wholesale_price: Vec<f64>,
    /// Realized PCC exchange, `[mg][step]` (kW).
    pub pcc_kw: Vec<Vec<f64>>,
    /// Wholesale exchange per step (kW).
    pub p_w_kw: Vec<f64>,
    pub reward: f64,
    /// Value predicted for the chosen action before the update.
    pub q_hat: f64,
    pub innovation: f64,
    pub ape: f64,
    /// Undiscounted wholesale revenue minus fuel cost ($).
    pub welfare: f64,
    /// Realized operating cost per microgrid ($).
    pub operating_cost: Vec<f64>,
    pub exchange_iterations: usize,
    /// ‖θ(t+1) − θ(t)‖∞.
    pub theta_change: f64,
    pub rls_reset: bool,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl EpisodeRecord {
    pub fn log_row(&self) -> EpisodeLogRow {
        EpisodeLogRow {
            episode: self.episode,
            reward: self.reward,
            q_hat: self.q_hat,
            ape: self.ape,
            price_mg: self.action.prices.iter().map(|p| mean(p)).collect(),
            pcc_kw_mg: self.pcc_kw.iter().map(|p| mean(p)).collect(),
            p_w_kw: mean(&self.p_w_kw),
            welfare: self.welfare,
        }
    }
}

/// Undiscounted welfare of an exchange: wholesale revenue minus fuel.
pub(crate) fn welfare_of(
    wholesale_price: &[f64],
    action: &ActionVector,
    out: &ExchangeOutcome,
) -> Result<f64, CoordinationError> {
    let revenue = compute_reward(wholesale_price, &out.p_w_kw, &action.prices, &out.pcc_kw(), 1.0)?;
    Ok(revenue - out.realized.iter().map(|r| r.operating_cost).sum::<f64>())
}

fn mg_forecast<R: Rng + ?Sized>(truth: &StateVector, rel: f64, rng: &mut R) -> StateVector {
    let mut draw = |x: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        x * (1.0 + rel * z)
    };
    let load_kw = truth.load_kw.iter().map(|row| row.iter().map(|&l| draw(l).max(0.0)).collect()).collect();
    let irradiance =
        truth.irradiance.iter().map(|row| row.iter().map(|&i| draw(i).clamp(0.0, 1.0)).collect()).collect();
    StateVector { irradiance, load_kw }
}

/// One pass of the training loop: estimate, act, exchange, reward, learn.
pub fn run_episode<R: Rng + ?Sized>(
    system: &System,
    agent: &mut TrainingState,
    episode: usize,
    settings: &Settings,
    rng: &mut R,
) -> Result<EpisodeRecord, CoordinationError> {
    let start = settings.window_start_for(episode, system.profile.steps());
    let inputs = system.window(start, settings.window_steps, episode);
    let truth = inputs.truth_state();
    let state = sample_state(&truth, settings.estimation, rng);
    let (action, explored) =
        select_action_eps_greedy(&agent.model, &state, &settings.bounds, settings.hyper.epsilon, rng);
    let forecast = mg_forecast(&truth, settings.mg_forecast_rel, rng);

    let out = fixed_point_exchange(system, &inputs, &action, Some(&forecast), settings)?;
    let pcc_kw = out.pcc_kw();
    let reward = compute_reward(&inputs.wholesale_price, &out.p_w_kw, &action.prices, &pcc_kw, settings.hyper.gamma)?;
    let welfare = welfare_of(&inputs.wholesale_price, &action, &out)?;

    let x = feature_map(&state, &action)?;
    let before = agent.model.theta.clone();
    let step = match settings.learning {
        LearningRule::Rls => rls_update(&mut agent.model, &mut agent.rls, &x, reward)?,
        LearningRule::Sgd => sgd_update(&mut agent.model, &x, reward, settings.hyper.step_size)?,
    };
    let theta_change = (&agent.model.theta - before).amax();

    Ok(EpisodeRecord {
        episode,
        window_start: start,
        state,
        action,
        explored,
        wholesale_price: inputs.wholesale_price,
        operating_cost: out.realized.iter().map(|r| r.operating_cost).collect(),
        exchange_iterations: out.iterations,
        p_w_kw: out.p_w_kw,
        pcc_kw,
        reward,
        q_hat: step.prediction,
        innovation: step.innovation,
        ape: (reward - step.prediction).abs() / reward.abs().max(APE_FLOOR),
        welfare,
        theta_change,
        rls_reset: step.reset,
    })
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub records: Vec<EpisodeRecord>,
    pub agent: TrainingState,
    /// True when the parameter change fell below the threshold before the
    /// episode budget ran out.
    pub converged: bool,
}

impl TrainingOutcome {
    pub fn log_rows(&self) -> Vec<EpisodeLogRow> {
        self.records.iter().map(EpisodeRecord::log_row).collect()
    }
}

/// Runs episodes until ‖θ(t+1) − θ(t)‖∞ drops below the threshold or the
/// episode budget is spent. All randomness comes from `settings.seed`.
pub fn run_training(
    system: &System,
    settings: &Settings,
    initial: Option<TrainingState>,
) -> Result<TrainingOutcome, CoordinationError> {
    if settings.episodes == 0 {
        return Err(CoordinationError::Invalid("training needs at least one episode".into()));
    }
    let mut agent = match initial {
        Some(a) => a,
        None => TrainingState::new(system.n_mgs(), settings)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut records = Vec::with_capacity(settings.episodes);
    let mut converged = false;
    for episode in 0..settings.episodes {
        let rec = run_episode(system, &mut agent, episode, settings, &mut rng)
            .map_err(|e| CoordinationError::Episode { episode, source: Box::new(e) })?;
        let change = rec.theta_change;
        log::debug!("episode {episode}: R {:.4} Q̂ {:.4} Δθ {change:.3e}", rec.reward, rec.q_hat);
        records.push(rec);
        if change < settings.theta_threshold {
            converged = true;
            break;
        }
    }
    Ok(TrainingOutcome { records, agent, converged })
}
