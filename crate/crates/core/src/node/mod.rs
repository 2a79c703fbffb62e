//! Per-node models: mobility, CPU execution and energy.

pub mod cpu;
pub mod energy;
pub mod mobility;

pub use cpu::{CpuState, Started};
pub use energy::{
    estimate_queue_time_cluster, estimate_queue_time_server, local_exec_energy, tick_energy,
    tx_rx_energy, Battery, EnergyState,
};
pub use mobility::{MobilityParams, MobilityState, Phase};
