//! Experiment harness behind the `msbd` binary: deterministic Monte-Carlo
//! trials, phase-transition grids, the 2-D deconvolution demo, and the
//! property-verification battery.

pub mod config;
pub mod experiments;
pub mod verify;
