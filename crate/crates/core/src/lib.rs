//! Uncertainty-aware Dyna-style model-based reinforcement learning.
//!
//! An ensemble of dynamics models scores its own disagreement at the root of
//! every imagined rollout and shortens the rollout when the disagreement is
//! high. The imagined transitions are mixed with real ones to train a soft
//! actor-critic agent on a small kinematic lane-driving simulator.

pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod replay;
pub mod rng;
pub mod sac;
pub mod shaping;
pub mod trainer;
pub mod world_model;

pub use error::{Error, Result};
