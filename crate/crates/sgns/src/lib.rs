//! Command-line harness around the spectral core: configuration files,
//! experiment registry and runners, artifact formats, and deterministic
//! Monte Carlo fan-out.

pub mod config;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod io;
pub mod registry;
