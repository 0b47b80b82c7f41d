//! Cycle-accurate behavioral simulator of a glitch-driven near-memory NTT
//! accelerator, together with the untimed field and transform arithmetic it
//! is checked against.

pub mod cli;
pub mod error;
pub mod field;
pub mod nearmem;
pub mod scheduler;
pub mod sram;
pub mod transform;

pub use error::{Error, Result};
pub use field::{Barrett, NttParams};
pub use scheduler::{
    simulate_polymul, simulate_transform, Calibration, CycleStats, SimConfig, SimRun, StatsReport,
};
pub use transform::{Direction, Ntt, Polynomial};
