//! Tape-based reverse-mode automatic differentiation over dense tensors,
//! feed-forward networks, and the Adam optimizer.
//!
//! A [`Tape`] is single-threaded and owned by one training step; parameters
//! are plain values that can be cloned freely for parallel evaluation.

mod adam;
mod net;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use net::{
    forward, forward_on_tape, l2_penalty_on_tape, l2_penalty_value, register_params, DenseNetSpec,
    NetParamIds, NetParams,
};
pub use tape::{Gradients, NodeId, Tape};
