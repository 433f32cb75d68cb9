//! Experiment orchestration on top of the `segilm` core: run configuration,
//! presets for the standard experiments, seeded multi-instantiation runs
//! with CSV/manifest/chart output, and offline latent/metric extraction.

pub mod chart;
pub mod config;
pub mod csvfmt;
pub mod latents;
pub mod presets;
pub mod runner;
