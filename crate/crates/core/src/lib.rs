//! Learned Koopman dynamical models and model predictive control on
//! low-dimensional surrogate systems.
//!
//! The pipeline: simulate a continuous-time surrogate environment, learn an
//! encoder/decoder pair whose latent coordinates evolve (approximately)
//! linearly, fit the latent dynamics by least squares, and close the loop
//! with a receding-horizon controller on the learned model.

pub mod autodiff;
pub mod baselines;
pub mod control;
pub mod envs;
pub mod error;
pub mod koopman;
pub mod numerics;
pub mod rng;

pub use error::{CoreError, Result};
