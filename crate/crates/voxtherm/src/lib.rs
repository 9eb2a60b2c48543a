//! Files, clocks and experiment protocols around [`voxtherm_core`].
//!
//! * [`config`]: TOML run configuration with documented defaults.
//! * [`history_io`], [`dataset_io`], [`model_io`], [`report`]: file formats.
//! * [`bench`]: the desk-scale experiment protocols.
//! * [`commands`]: one function per CLI subcommand.

pub mod bench;
pub mod commands;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod history_io;
pub mod model_io;
pub mod report;

use std::time::Instant;

pub use error::{Error, Result};
pub use voxtherm_core as core;

/// Seconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::start()
    }
}

impl voxtherm_core::forecast::Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
