//! Geometric scattering on graphs with fixed and learnable diffusion-scale
//! filter banks.
//!
//! The crate builds multiscale graph features from cascades of lazy
//! random-walk diffusion wavelets, optionally with the scales themselves
//! learned through a row-stochastic selection matrix, and ships the
//! classification/regression heads, explicit reverse-mode gradients, and the
//! cross-validation harness needed to train on whole-graph tasks. A
//! verification suite checks the frame, permutation-invariance, and
//! nonexpansiveness guarantees numerically.

pub mod autograd;
pub mod data_io;
pub mod error;
pub mod filter_bank;
pub mod graph;
pub mod heads;
pub mod legs;
pub mod scattering;
pub mod trainer;
pub mod verify;
pub mod rng;

pub use error::{Error, Result};
