//! Comparison models: a least-squares linear fit on raw states, and the
//! single-step training variant of the deep model (fit on the full window,
//! no recursion in the loss).

use crate::error::{CoreError, Result};
use crate::koopman::{
    build_matrices, relative_l1_error, train_new, SnapshotSequence, TrainError, TrainObjective,
    TrainReport, TrainingConfig,
};
use crate::numerics::{lstsq_min_norm, Matrix};

/// Linear one-step model on raw states: x_{t+1} ~ A x_t.
#[derive(Debug, Clone, PartialEq)]
pub struct DmdModel {
    pub a_raw: Matrix,
    /// Transition count of the sequences the fit consumed.
    pub window: usize,
}

/// Stack the snapshot matrices of every sequence and fit the minimum-norm
/// least-squares propagator.
pub fn dmd_fit(sequences: &[SnapshotSequence]) -> Result<DmdModel> {
    if sequences.is_empty() {
        return Err(CoreError::InvalidArgument(
            "dmd_fit needs at least one sequence".to_string(),
        ));
    }
    let dim = sequences[0].state_dim();
    let mut pairs = Vec::with_capacity(sequences.len());
    for seq in sequences {
        if seq.state_dim() != dim {
            return Err(CoreError::DimensionMismatch(
                "sequences have inconsistent state dimensions".to_string(),
            ));
        }
        pairs.push(build_matrices(seq)?);
    }
    let xs: Vec<&Matrix> = pairs.iter().map(|(x, _, _)| x).collect();
    let ys: Vec<&Matrix> = pairs.iter().map(|(_, y, _)| y).collect();
    let x = Matrix::hstack(&xs);
    let y = Matrix::hstack(&ys);
    Ok(DmdModel {
        a_raw: lstsq_min_norm(&x, &y)?,
        window: sequences[0].transitions(),
    })
}

/// Repeated application of the fitted propagator.
pub fn dmd_predict(model: &DmdModel, x1: &[f64], horizon: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(horizon);
    let mut state = x1.to_vec();
    for _ in 0..horizon {
        state = model.a_raw.matvec(&state);
        out.push(state.clone());
    }
    out
}

/// Error series aligned with the deep model's evaluation harness: the
/// prediction starts from the state at the end of the warmup window and is
/// compared against the remainder of the sequence.
pub fn dmd_prediction_error_series(
    model: &DmdModel,
    seq: &SnapshotSequence,
    warmup: usize,
    horizon: usize,
) -> Result<Vec<f64>> {
    if seq.transitions() < warmup + horizon {
        return Err(CoreError::InvalidArgument(format!(
            "sequence has {} transitions; need {}",
            seq.transitions(),
            warmup + horizon
        )));
    }
    let pred = dmd_predict(model, &seq.states[warmup], horizon);
    let truth: Vec<Vec<f64>> = seq.states[warmup + 1..=warmup + horizon].to_vec();
    relative_l1_error(&pred, &truth)
}

/// Train the single-step variant: identical architecture and data handling,
/// but the dynamics fit uses all columns and the loss scores one-step
/// predictions instead of a recursive rollout. The resulting model also
/// fits from a full-length window at prediction time.
pub fn train_single_step_variant(
    dataset: &[SnapshotSequence],
    config: &TrainingConfig,
) -> std::result::Result<TrainReport, TrainError> {
    let full_window = TrainingConfig {
        fit_window: config.sequence_length,
        ..config.clone()
    };
    train_new(dataset, &full_window, TrainObjective::SingleStep)
}
