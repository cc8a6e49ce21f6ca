//! Spatially consistent, time-evolving mmWave channel impulse responses for a
//! user terminal moving along a track.
//!
//! The pipeline: build the track, freeze correlated LOS and shadowing maps
//! over the area, draw an anchor CIR at the start point, then evolve delays,
//! angles, phases, powers and the LOS state step by step.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod drop;
pub mod error;
pub mod evolution;
pub mod field;
pub mod geometry;
pub mod los;
pub mod output;
pub mod rng;
pub mod runner;
pub mod shadowing;
pub mod trajectory;

pub use config::SimulationConfig;
pub use drop::ChannelSnapshot;
pub use error::{Error, Result};
pub use output::{write_outputs, RunManifest};
pub use runner::{run_simulation, SimulationRun};
