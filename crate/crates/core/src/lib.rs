//! Spin-locking noise spectroscopy.
//!
//! A qubit held along +x by a resonant drive of Rabi frequency Ω depolarizes
//! only under phase noise near Ω, at rate `½Ω²S_φ(Ω)`. Scanning Ω therefore
//! maps out the noise spectrum. This crate synthesizes noise with a given
//! spectrum, propagates the locked qubit, evaluates the analytic decay laws,
//! computes trapped-ion sideband couplings and reconstructs spectra from
//! simulated scans.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod motion;
pub mod noise;
pub mod quad;
pub mod spectroscopy;

pub use error::{Error, Result};
