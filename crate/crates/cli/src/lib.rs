//! Experiment driver for the `drbfpu` solvers: configuration handling,
//! result files and SVG plots.

pub mod config;
pub mod plot;
pub mod run;
