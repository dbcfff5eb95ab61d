//! Schedule-based execution strategies built on uncertainty bands.
//!
//! The band trajectories (x_min, x_tgt, x_max) bound order slicing; the
//! filled position against them partitions residual shares into
//! aggressive, passive, and dark allocations. VWAP, POV, and
//! implementation-shortfall schedules all reduce to band producers
//! consumed by one tactical driver, in either a continuous (per-tick) or
//! a discretized (per-bin) loop, exercised here against a deterministic
//! seeded market simulator.

// Validation guards use `!(v > 0.0)` so NaN fails them; the suggested
// `v <= 0.0` would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrete;
pub mod driver;
pub mod error;
pub mod math;
pub mod pov;
pub mod report;
pub mod schedule;
pub mod shortfall;
pub mod sim;
pub mod vwap;

pub use error::{Error, Result};
pub use schedule::{
    band_compliance, compute_partition, BandSet, Compliance, ExecutionState, FillRecord, Order,
    SharePartition, Side, Venue,
};
