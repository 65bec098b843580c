//! Sensor-network simulator for chain Wyner-Ziv coding of a Brownian field.
//!
//! - [`layout`]: node placement, radii, bands and transmission groups.
//! - [`schedule`]: the slot-by-slot TDMA schedule and its audit.
//! - [`chain`]: chain coding with coded side information, distortion
//!   profiles and the error-propagation model.

pub mod chain;
pub mod layout;
pub mod schedule;

use thiserror::Error;

pub use chain::{chain_code, ChainConfig, ChainRun, ChainRunReport};
pub use layout::{build_layout, NetworkLayout, NodeId};
pub use schedule::{run_transport, step_schedule, Faults, ScheduleState, TransportReport};

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invariant `{name}` violated: {detail}")]
    Invariant { name: &'static str, detail: String },
    #[error(transparent)]
    Core(#[from] wzlvq::Error),
}
