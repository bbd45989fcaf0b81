//! The cooperative pricing agent: state estimation, bilinear value function,
//! action selection, reward and adaptive training.

mod checkpoint;
mod policy;
mod reward;
mod rls;
mod state;
mod value;

pub use checkpoint::{checkpoint_to_string, load_checkpoint, parse_checkpoint, save_checkpoint};
pub use policy::{price_coefficient, select_action_eps_greedy, select_action_optimal};
pub use reward::compute_reward;
pub use rls::{rls_update, sgd_update, RlsState, RlsStep};
pub use state::{beta_shapes, sample_state, EstimationError, StateVector};
pub use value::{feature_dim, feature_map, q_value, ActionVector, PriceBounds, ValueModel};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Agent hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub gamma: f64,
    /// Step size of the plain gradient rule (ablation only).
    pub step_size: f64,
    pub mu: f64,
    pub phi: f64,
    pub epsilon: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters { gamma: 0.99, step_size: 0.01, mu: 1e-5, phi: 0.01, epsilon: 0.1 }
    }
}
