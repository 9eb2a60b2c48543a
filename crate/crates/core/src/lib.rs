#![cfg_attr(not(test), no_std)]

//! Voxel-level thermal histories for laser metal deposition builds and
//! staged extremely-randomized-trees forecasting of future voxel temperatures.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! wall clocks or the command line lives in the `voxtherm` companion crate.
//!
//! Pipeline:
//!
//! 1. [`schedule::build_zigzag_schedule`] turns a [`grid::GridSpec`] and
//!    [`grid::LaserParams`] into a [`schedule::DepositionSchedule`].
//! 2. [`simulator::run`] integrates the heat equation with voxel activation
//!    and produces a [`history::ThermalHistory`].
//! 3. [`features::build_dataset`] flattens the history into one
//!    [`features::FeatureRow`] per `(voxel, timestep)`.
//! 4. [`forecast::iterative_forecast`] retrains a [`ert::Forest`] every
//!    `stage_interval` timesteps on truth plus its own committed predictions.
//! 5. [`metrics::evaluate`] scores the forecast overall and per voxel category.

extern crate alloc;

pub mod ert;
pub mod error;
pub mod features;
pub mod forecast;
pub mod grid;
pub mod history;
pub mod metrics;
pub mod schedule;
pub mod simulator;

pub use error::{Error, Result};
pub use grid::{GridSpec, LaserParams, MaterialProps, VoxelIndex};
pub use history::{TemperatureSource, ThermalHistory};
pub use schedule::DepositionSchedule;
