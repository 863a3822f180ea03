//! Deterministic 2D swarm simulation with histogram-based local
//! communication protocols and multi-agent trust-region policy optimization.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what training and the gradient checks use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod policy;
pub mod protocols;
pub mod scalar;
pub mod sim;
pub mod tasks;
pub mod trpo;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Vec2 = geometry::Vec2<f64>;
pub type SimConfig = sim::SimConfig<f64>;
pub type AgentState = sim::AgentState<f64>;
pub type WorldState = sim::WorldState<f64>;
pub type MotorAction = sim::MotorAction<f64>;
pub type ProtocolConfig = protocols::ProtocolConfig<f64>;
pub type TaskSpec = tasks::TaskSpec<f64>;
pub type EdgeParams = tasks::EdgeParams<f64>;
pub type LinkParams = tasks::LinkParams<f64>;
pub type PolicyParams = policy::PolicyParams<f64>;
pub type HistoryWindow = policy::HistoryWindow<f64>;
pub type GaussianActionDistribution = policy::GaussianActionDistribution<f64>;
pub type TrpoConfig = trpo::TrpoConfig<f64>;
pub type TrajectoryBatch = trpo::TrajectoryBatch<f64>;
pub type EnvConfig = trpo::EnvConfig<f64>;

pub use policy::{Activation, PolicySpec};
pub use protocols::ObservationMode;
