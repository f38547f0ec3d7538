//! The learned Koopman model: observable networks, least-squares latent
//! dynamics fits (with and without forcing), recursive rollouts, the
//! training loop, and prediction metrics.

mod checkpoint;
mod data;
mod eval;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use data::{
    aggregate_error_series, build_matrices, relative_l1_error, SnapshotSequence,
};
pub use eval::{evaluate_sequences, metrics_csv, prediction_error_series};
pub use model::{
    fit_a_forced, fit_a_unforced, rollout_latent, KoopmanModel, Normalization, Prediction,
    TrainingConfig,
};
pub use train::{
    flat_params, sequence_loss, sequence_loss_with_gradients, train, train_new,
    write_flat_params, TrainError, TrainObjective, TrainReport,
};
