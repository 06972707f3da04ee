//! Robust multitask diffusion subband adaptive filtering.
//!
//! This crate holds the allocation-only (`no_std` + `alloc`) core:
//!
//! - [`topology`]: clustered network topology, combination weights, cluster targets.
//! - [`signal`]: AR input processes, contaminated-Gaussian noise, linear-model references.
//! - [`filterbank`]: cosine-modulated pseudo-QMF analysis bank, decimation, subband regressors.
//! - [`robust`]: modified Huber cost/score and the median-based threshold recursion.
//! - [`algorithms`]: MD-NMSAF and the MD-LMS / MD-APA / MD-APM / MD-APMCC baselines.
//! - [`sim`]: single-trial network simulation and per-iteration network MSD.
//! - [`theory`]: moment estimation, stability bounds, transient and steady-state MSD.
//! - [`complexity`]: per-iteration operation counts.
//!
//! IO, configuration files, parallel Monte-Carlo and the CLI live in the `subdiff` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod algorithms;
pub mod complexity;
mod error;
pub mod filterbank;
pub mod linalg;
pub mod rng;
pub mod robust;
pub mod signal;
pub mod sim;
pub mod theory;
pub mod topology;

pub use error::{Error, Result};
