//! Simulation and analytics for the multidimensional elephant random walk
//! (MERW) with stops and with random step sizes.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs and an explicit random source, so ensembles can be
//! replayed bit-for-bit on any platform. Threading, files and the command
//! line live in the companion `merw` crate.

#![no_std]
#![allow(clippy::excessive_precision)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod harness;
pub mod model;
pub mod rng;
pub mod sizes;
pub mod special;
pub mod stats;
pub mod walk;

pub use model::{
    apply_action, classify_regime, sample_action, validate_params, ModelError, Regime, RegimeLabel,
    Sign, StepAction, UnitStep, Variant, WalkParams,
};
pub use sizes::{SizeLaw, StepSizeModel};
pub use walk::{Checkpoints, Snapshot, WalkError, WalkTrace, Walker};
