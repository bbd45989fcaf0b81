//! Bi-level co-simulation of networked microgrids.
//!
//! Level I is a cooperative pricing agent whose state-action value function is
//! a bilinear regression trained by regularized recursive least squares with
//! exponential forgetting. Level II is a set of microgrid controllers, each
//! solving a power-flow-constrained economic dispatch against the locational
//! retail prices it receives. The two levels are coupled through an AC power
//! flow on the host feeder.

pub mod coordination;
pub mod dispatch;
pub mod grid;
pub mod rl;
pub mod scenario;
