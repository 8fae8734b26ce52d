//! Deterministic discrete-event simulation of the NALE array.
//!
//! Events are ordered by `(time, tile, sequence number)`, so a run is a pure
//! function of the image and the configuration.

pub mod channel;
pub mod config;
mod machine;
pub mod metrics;
pub mod reference;

pub use config::{ChannelParams, ConfigError, EnergyTable, LatencyTable, MachineConfig, MemoryParams};
pub use machine::{simulate, Delta, EventKind, Machine, NaleStatus, RunResult, SimError, Step, StepReport};
pub use metrics::{estimate_energy, Metrics};
pub use reference::{reference_model, reference_run};
