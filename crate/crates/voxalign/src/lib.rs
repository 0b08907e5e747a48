//! Voxel-grid supervision toolkit for camera-based 3D semantic scene
//! completion.
//!
//! The crate covers the non-neural side of a multi-resolution alignment
//! training pipeline: pinhole projection geometry and depth back-projection
//! ([`camera`]), multi-resolution feature lifting and seed fusion ([`lift`]),
//! cubic semantic anisotropy and the anisotropy-weighted cross entropy
//! ([`csa`]), critical-voxel selection with the circulated symmetric-KL loss
//! ([`cda`]), scene-completion metrics ([`metrics`]), SemanticKITTI and
//! internal-container I/O ([`kittio`]), and deterministic synthetic scenes
//! with brute-force oracles for verification ([`synth`]).
//!
//! Losses are plain numeric kernels: every loss returns its value together
//! with the exact analytic gradient with respect to its raw score inputs,
//! so optimization loops and gradient checks need no autodiff framework.

pub mod camera;
pub mod cda;
pub mod csa;
pub mod error;
pub mod grid;
pub mod kittio;
pub mod lift;
pub mod metrics;
pub mod synth;
mod util;

pub use error::{Error, Result};
pub use util::SplitMix64;
