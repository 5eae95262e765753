//! Configuration-driven experiment runner behind the `quartic` binary.
//!
//! A run reads a flat INI file, validates every field before computing,
//! writes one CSV per observable (floats with 17 significant digits), an
//! optional SVG per CSV, and `manifest.ini`, which is itself a valid
//! config reproducing the run.

pub mod config;
pub mod ini;
pub mod output;
pub mod runner;

pub use config::{ExperimentConfig, Kind, Task, TimeGrid};
pub use ini::Ini;
pub use runner::{compute, env_override, manifest, run, validate, RunOptions, RunReport};
