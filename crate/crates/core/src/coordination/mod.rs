//! The bi-level loop: the pricing agent sets retail prices, each microgrid
//! dispatches against them, and the feeder power flow closes the voltage
//! exchange at the PCCs.

mod episode;
mod exchange;
mod metrics;
mod oracle;

pub use episode::{run_episode, run_training, EpisodeRecord, TrainingOutcome, TrainingState, APE_FLOOR};
pub use exchange::{fixed_point_exchange, ExchangeOutcome, WindowInputs};
pub use metrics::{rolling_mean, shock_metrics, ShockMetrics, ShockWindows};
pub use oracle::{
    allocate_revenue, centralized_oracle, evaluate_policy, evaluate_welfare, price_grid, OracleResult,
    PolicyEvaluation, WelfareEvaluation,
};

use thiserror::Error;

use crate::dispatch::{DispatchError, DispatchOptions, MgAssets};
use crate::grid::{build_admittance, AdmittanceMatrix, GridError, InjectionSet, NetworkModel};
use crate::rl::{EstimationError, Hyperparameters, PriceBounds, RlError, StateVector};
use crate::scenario::{
    generate_synthetic, load_assets, load_network, load_profiles, ExperimentConfig, LearningRule, OverrideEvent,
    ScenarioError, ScenarioProfile,
};

#[derive(Debug, Error)]
pub enum CoordinationError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("feeder power flow: {0}")]
    Grid(#[from] GridError),
    #[error("microgrid {mg}: {source}")]
    Dispatch {
        mg: usize,
        #[source]
        source: DispatchError,
    },
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error("PCC voltages did not settle within {iterations} exchange iterations (last change {last_change:.3e} pu)")]
    FixedPoint {
        iterations: usize,
        last_change: f64,
        /// PCC voltage estimates per iteration, `[iteration][mg][step]`.
        trajectory: Vec<Vec<Vec<f64>>>,
    },
    #[error("oracle grid has {points}^{dims} actions, above the limit of {limit}; use fewer grid points or a shorter window")]
    OracleGuard { points: usize, dims: usize, limit: u64 },
    #[error("episode {episode}: {source}")]
    Episode {
        episode: usize,
        #[source]
        source: Box<CoordinationError>,
    },
}

impl CoordinationError {
    /// True for failures of a numerical method rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            CoordinationError::Grid(_) | CoordinationError::FixedPoint { .. } => true,
            CoordinationError::Dispatch { source, .. } => {
                !matches!(source, DispatchError::Invalid(_) | DispatchError::Domain(_))
            }
            CoordinationError::Rl(e) => !matches!(e, RlError::Io { .. }),
            CoordinationError::Episode { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            CoordinationError::Scenario(ScenarioError::Io { .. }) | CoordinationError::Rl(RlError::Io { .. }) => true,
            CoordinationError::Episode { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Stop once no PCC voltage moves by this much between iterations (pu).
    pub v_threshold: f64,
    pub max_iterations: usize,
    /// Starting PCC voltage estimate (pu).
    pub initial_voltage: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig { v_threshold: 1e-4, max_iterations: 20, initial_voltage: 1.0 }
    }
}

/// Everything the loop needs besides the physical system.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub hyper: Hyperparameters,
    pub delta_init: f64,
    pub learning: LearningRule,
    pub bounds: PriceBounds,
    pub window_steps: usize,
    pub estimation: EstimationError,
    /// Relative standard deviation of each microgrid's own forecast.
    pub mg_forecast_rel: f64,
    pub episodes: usize,
    pub theta_threshold: f64,
    pub window_start: usize,
    pub window_stride: usize,
    pub fixed_point: FixedPointConfig,
    pub dispatch: DispatchOptions,
    pub terminal_soc: bool,
    pub oracle_grid_points: usize,
    pub oracle_max_evaluations: u64,
    pub oracle_window_start: usize,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            hyper: Hyperparameters::default(),
            delta_init: 1e3,
            learning: LearningRule::Rls,
            bounds: PriceBounds { min: 0.28, max: 0.32 },
            window_steps: 4,
            estimation: EstimationError { e_pv: 0.02, e_d: 5.0 },
            mg_forecast_rel: 0.02,
            episodes: 500,
            theta_threshold: 1e-4,
            window_start: 0,
            window_stride: 1,
            fixed_point: FixedPointConfig::default(),
            dispatch: DispatchOptions::default(),
            terminal_soc: true,
            oracle_grid_points: 6,
            oracle_max_evaluations: 1_000_000,
            oracle_window_start: 0,
            seed: 0,
        }
    }
}

impl Settings {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Settings {
            hyper: cfg.hyperparameters(),
            delta_init: cfg.agent.delta_init,
            learning: cfg.agent.learning,
            bounds: cfg.price_bounds(),
            window_steps: cfg.agent.window_steps,
            estimation: EstimationError { e_pv: cfg.estimation.e_pv, e_d: cfg.estimation.e_d_kw },
            mg_forecast_rel: cfg.estimation.mg_forecast_rel,
            episodes: cfg.training.episodes,
            theta_threshold: cfg.training.theta_threshold,
            window_start: cfg.training.window_start,
            window_stride: cfg.training.window_stride,
            fixed_point: FixedPointConfig {
                v_threshold: cfg.fixed_point.v_threshold,
                max_iterations: cfg.fixed_point.max_iterations,
                initial_voltage: cfg.fixed_point.initial_voltage,
            },
            dispatch: DispatchOptions {
                feas_tol: cfg.dispatch.feas_tol,
                slp_tol: cfg.dispatch.slp_tol,
                max_outer: cfg.dispatch.max_outer,
                ..DispatchOptions::default()
            },
            terminal_soc: cfg.dispatch.terminal_soc,
            oracle_grid_points: cfg.oracle.grid_points,
            oracle_max_evaluations: cfg.oracle.max_evaluations,
            oracle_window_start: cfg.oracle.window_start,
            seed: cfg.seed,
        }
    }

    /// First step of the decision window used by training episode `episode`.
    pub fn window_start_for(&self, episode: usize, horizon: usize) -> usize {
        (self.window_start + episode * self.window_stride) % horizon
    }
}

/// A microgrid and the feeder bus it connects to.
#[derive(Debug, Clone, PartialEq)]
pub struct Microgrid {
    pub assets: MgAssets,
    pub pcc_bus: u32,
    /// Index of `pcc_bus` in the feeder's bus list.
    pub pcc_index: usize,
}

/// Multipliers applied from an override episode on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterScales {
    pub fuel_price: f64,
    pub load: f64,
    pub pv: f64,
    pub wholesale_price: f64,
}

impl Default for ParameterScales {
    fn default() -> Self {
        ParameterScales { fuel_price: 1.0, load: 1.0, pv: 1.0, wholesale_price: 1.0 }
    }
}

impl ParameterScales {
    /// Scales in force at `episode`: the latest event per parameter wins.
    pub fn at(events: &[OverrideEvent], episode: usize) -> Self {
        let mut active: Vec<&OverrideEvent> = events.iter().filter(|e| e.episode <= episode).collect();
        active.sort_by_key(|e| e.episode);
        let mut s = ParameterScales::default();
        for e in active {
            match e.parameter.as_str() {
                "fuel_price_scale" => s.fuel_price = e.value,
                "load_scale" => s.load = e.value,
                "pv_scale" => s.pv = e.value,
                "wholesale_price_scale" => s.wholesale_price = e.value,
                _ => {}
            }
        }
        s
    }

    fn scale_assets(&self, a: &MgAssets) -> MgAssets {
        let mut a = a.clone();
        for dg in &mut a.dgs {
            dg.fuel_price *= self.fuel_price;
        }
        for pv in &mut a.pv {
            pv.rated_kw *= self.pv;
        }
        a
    }
}

/// Feeder, microgrids and the time series that drive them.
#[derive(Debug, Clone)]
pub struct System {
    pub feeder: NetworkModel,
    pub(crate) y: AdmittanceMatrix,
    pub microgrids: Vec<Microgrid>,
    pub profile: ScenarioProfile,
    /// Feeder-owned demand as injections (pu on the feeder base).
    pub background: InjectionSet,
}

impl System {
    pub fn new(
        feeder: NetworkModel,
        microgrids: Vec<(MgAssets, u32)>,
        profile: ScenarioProfile,
        feeder_load_scale: f64,
    ) -> Result<Self, CoordinationError> {
        profile.validate()?;
        if microgrids.len() != profile.n_mgs() {
            return Err(CoordinationError::Invalid(format!(
                "{} microgrids but the profile has series for {}",
                microgrids.len(),
                profile.n_mgs()
            )));
        }
        let mut mgs = Vec::with_capacity(microgrids.len());
        for (assets, bus) in microgrids {
            let idx = feeder.bus_index(bus).ok_or_else(|| {
                CoordinationError::Invalid(format!("PCC bus {bus} is not on feeder `{}`", feeder.name))
            })?;
            if idx == feeder.slack_index() {
                return Err(CoordinationError::Invalid(format!("PCC bus {bus} is the feeder slack bus")));
            }
            if mgs.iter().any(|m: &Microgrid| m.pcc_index == idx) {
                return Err(CoordinationError::Invalid(format!("two microgrids share PCC bus {bus}")));
            }
            mgs.push(Microgrid { assets, pcc_bus: bus, pcc_index: idx });
        }
        let background = feeder.nominal_injections().scaled(feeder_load_scale);
        Ok(System { y: build_admittance(&feeder), feeder, microgrids: mgs, profile, background })
    }

    /// Loads the feeder, microgrid assets and profile named by a config.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, CoordinationError> {
        let s = &cfg.scenario;
        let feeder = load_network(cfg.resolve(&s.feeder))?;
        let mut profile = match (&s.profile, &s.synthetic) {
            (Some(p), _) => load_profiles(cfg.resolve(p))?,
            (None, Some(spec)) => generate_synthetic(spec, s.synthetic_seed.unwrap_or(cfg.seed))?,
            (None, None) => return Err(CoordinationError::Invalid("scenario has no profile".into())),
        };
        if let Some(price) = s.flat_wholesale_price {
            profile.wholesale_price.iter_mut().for_each(|p| *p = price);
        }
        profile.events = s.events.clone();
        let mgs = s
            .microgrids
            .iter()
            .map(|m| Ok((load_assets(cfg.resolve(&m.assets))?, m.pcc_bus)))
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        System::new(feeder, mgs, profile, s.feeder_load_scale)
    }

    pub fn n_mgs(&self) -> usize {
        self.microgrids.len()
    }

    /// True inputs of the window starting at `start`, with the overrides
    /// active at `episode`.
    pub fn window(&self, start: usize, steps: usize, episode: usize) -> WindowInputs {
        let scales = ParameterScales::at(&self.profile.events, episode);
        let idx = self.profile.window(start, steps);
        let pick = |s: &Vec<f64>, k: f64| idx.iter().map(|&t| s[t] * k).collect::<Vec<f64>>();
        WindowInputs {
            start,
            dt_h: self.profile.dt_h,
            wholesale_price: pick(&self.profile.wholesale_price, scales.wholesale_price),
            load_kw: self.profile.load_kw.iter().map(|s| pick(s, scales.load)).collect(),
            irradiance: self.profile.irradiance.iter().map(|s| pick(s, 1.0)).collect(),
            assets: self.microgrids.iter().map(|m| scales.scale_assets(&m.assets)).collect(),
        }
    }
}

impl WindowInputs {
    pub fn truth_state(&self) -> StateVector {
        StateVector { irradiance: self.irradiance.clone(), load_kw: self.load_kw.clone() }
    }
}
