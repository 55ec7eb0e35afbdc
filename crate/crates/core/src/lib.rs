//! Leaky integrate-and-fire networks with Gaussian synaptic coupling:
//! exact and numerical simulation, spike-pattern analysis, constructive
//! function encoding, and gradient training through smoothed resets.
//!
//! The model is a hybrid dynamical system: membranes integrate a leaky
//! first-order flow between threshold crossings and discharge at crossings.
//! The crate keeps two consistent views of it. The *hard* view ([`lif`])
//! resets discontinuously and admits closed forms used as oracles. The
//! *smoothed* view ([`mollify`]) replaces the jump by a sharp but smooth
//! partial discharge, restoring differentiability so that [`grad`] can push
//! sensitivities through entire spike cascades.

#![warn(missing_docs)]

pub mod analysis;
pub mod config;
pub mod current;
pub mod data;
pub mod error;
pub mod grad;
pub mod integrate;
pub mod lif;
pub mod mollify;
pub mod params;
pub mod spike;
pub mod suite;
pub mod train;
pub mod ua;

pub use error::{Error, Result};
pub use params::{StructuralParams, TrainableParams};
pub use spike::{ResetEvent, SnnOutput, SpikeTrain, Trajectory};
