// Parameter checks are written as `!(x > 0.0)` on purpose so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod campaign;
pub mod engine;
pub mod envgen;
pub mod io;
pub mod error;
pub mod model;
pub mod network;
pub mod node;
pub mod orchestration;
pub mod presets;
pub mod scalar;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar used by the simulator and by the agents it runs.
pub type Real = f64;
/// Pricing agent as instantiated by the simulator.
pub type Agent = agents::DdpgAgent<Real>;
/// Single-precision agent, for experiments with the learning code alone.
pub type AgentF32 = agents::DdpgAgent<f32>;
