//! Experiment harness around `smoothsgd-core`: JSON configs, parallel
//! ensembles, noise calibration, the three-row landscape figure, and CSV and
//! SVG artifacts.

pub mod calibrate;
pub mod commands;
pub mod config;
pub mod ensemble;
mod error;
pub mod figure3;
pub mod io;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
