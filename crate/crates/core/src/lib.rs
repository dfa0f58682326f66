//! Event-triggered decentralized learning over time-varying device graphs.
//!
//! Devices hold local models, mix them with neighbors through Metropolis
//! weights when a bandwidth-aware trigger fires, and take local gradient
//! steps. The crate covers topology generation and certification, mixing
//! matrices, local learning tasks, the simulation engine, post-hoc analysis,
//! and a reproducible experiment runner.

pub mod analysis;
pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod learning;
pub mod mixing;
mod rng;
pub mod suite;
pub mod topology;

pub use engine::{run, Simulation, SimulationConfig, TriggerPolicy};
pub use error::{Error, Result};
pub use learning::{LocalTask, ModelParams, StepPolicy};
pub use mixing::{TransitionMatrix, TriggerVector};
pub use topology::{GraphSnapshot, InfoFlowLog, TopologySchedule};
