use crate::error::{CoreError, Result};
use crate::koopman::model::KoopmanModel;
use crate::koopman::{aggregate_error_series, relative_l1_error, SnapshotSequence};

/// Relative L1 error per prediction step for one held-out sequence.
///
/// The first fit_window + 1 states are the warmup that the dynamics matrix
/// is fit on; steps beyond them are predicted and compared against the
/// remainder of the sequence.
pub fn prediction_error_series(
    model: &KoopmanModel,
    seq: &SnapshotSequence,
    horizon: usize,
) -> Result<Vec<f64>> {
    let w = model.fit_window;
    if seq.transitions() < w + horizon {
        return Err(CoreError::InvalidArgument(format!(
            "sequence has {} transitions; need {} for warmup plus horizon",
            seq.transitions(),
            w + horizon
        )));
    }
    let warmup = seq.window(0, w);
    let future_inputs = &seq.inputs[w..w + horizon];
    let prediction = model.predict(&warmup, future_inputs, horizon)?;
    let truth: Vec<Vec<f64>> = seq.states[w + 1..=w + horizon].to_vec();
    relative_l1_error(&prediction.states, &truth)
}

/// Error series for a batch of held-out sequences.
pub fn evaluate_sequences(
    model: &KoopmanModel,
    sequences: &[SnapshotSequence],
    horizon: usize,
) -> Result<Vec<Vec<f64>>> {
    sequences
        .iter()
        .map(|seq| prediction_error_series(model, seq, horizon))
        .collect()
}

/// Metrics CSV shared by every model variant: `step,mean_rel_l1,std_rel_l1`,
/// one row per prediction step (step is 1-based).
pub fn metrics_csv(error_series: &[Vec<f64>]) -> String {
    let aggregated = aggregate_error_series(error_series);
    let mut out = String::from("step,mean_rel_l1,std_rel_l1\n");
    for (step, (mean, std)) in aggregated.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", step + 1, mean, std));
    }
    out
}
