//! Experiment harness for multitask diffusion subband adaptive filtering: configuration,
//! presets, Monte-Carlo ensembles, CSV outputs and the `subdiff` command line.

pub mod config;
pub mod experiments;
pub mod io;
pub mod mc;
pub mod presets;

pub use subdiff_core as core;
