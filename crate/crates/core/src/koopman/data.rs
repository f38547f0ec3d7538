use crate::error::{CoreError, Result};
use crate::numerics::{l1_norm, Matrix};

/// Ordered state snapshots with the control inputs that produced them.
///
/// A sequence of T transitions holds T+1 states and T scalar inputs, where
/// `inputs[t]` acts on the step from `states[t]` to `states[t+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSequence {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<f64>,
    /// Seconds between consecutive snapshots.
    pub dt: f64,
}

impl SnapshotSequence {
    pub fn new(states: Vec<Vec<f64>>, inputs: Vec<f64>, dt: f64) -> Result<Self> {
        let seq = Self { states, inputs, dt };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(CoreError::InvalidArgument(
                "sequence needs at least one state".to_string(),
            ));
        }
        if self.states.len() != self.inputs.len() + 1 {
            return Err(CoreError::DimensionMismatch(format!(
                "sequence has {} states but {} inputs; expected states = inputs + 1",
                self.states.len(),
                self.inputs.len()
            )));
        }
        let dim = self.states[0].len();
        if dim == 0 {
            return Err(CoreError::InvalidArgument(
                "states must have at least one dimension".to_string(),
            ));
        }
        for (i, s) in self.states.iter().enumerate() {
            if s.len() != dim {
                return Err(CoreError::DimensionMismatch(format!(
                    "state {i} has dimension {} but state 0 has {dim}",
                    s.len()
                )));
            }
            if !s.iter().all(|v| v.is_finite()) {
                return Err(CoreError::InvalidArgument(format!(
                    "state {i} contains non-finite values"
                )));
            }
        }
        if !self.inputs.iter().all(|v| v.is_finite()) {
            return Err(CoreError::InvalidArgument(
                "inputs contain non-finite values".to_string(),
            ));
        }
        Ok(())
    }

    /// Number of transitions T.
    pub fn transitions(&self) -> usize {
        self.inputs.len()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    /// Sub-sequence covering states [start, start + transitions] and the
    /// matching inputs.
    pub fn window(&self, start: usize, transitions: usize) -> SnapshotSequence {
        assert!(start + transitions < self.states.len(), "window out of range");
        SnapshotSequence {
            states: self.states[start..=start + transitions].to_vec(),
            inputs: self.inputs[start..start + transitions].to_vec(),
            dt: self.dt,
        }
    }
}

/// Snapshot matrices for the one-step least-squares fit: X holds states
/// 1..T, Y holds states 2..T+1, and the input matrix holds the inputs that
/// drive each transition.
pub fn build_matrices(seq: &SnapshotSequence) -> Result<(Matrix, Matrix, Matrix)> {
    seq.validate()?;
    let t = seq.transitions();
    if t < 1 {
        return Err(CoreError::InvalidArgument(
            "need at least one transition to build snapshot matrices".to_string(),
        ));
    }
    let x = Matrix::from_columns(&seq.states[..t].to_vec());
    let y = Matrix::from_columns(&seq.states[1..].to_vec());
    let gamma = Matrix::from_fn(1, t, |_, j| seq.inputs[j]);
    Ok((x, y, gamma))
}

/// Per-step relative L1 prediction error: |pred - truth|_1 / |truth|_1.
pub fn relative_l1_error(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "prediction has {} steps, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut errors = Vec::with_capacity(pred.len());
    for (step, (p, t)) in pred.iter().zip(truth).enumerate() {
        if p.len() != t.len() {
            return Err(CoreError::DimensionMismatch(format!(
                "step {step}: prediction dim {} vs truth dim {}",
                p.len(),
                t.len()
            )));
        }
        let denom = l1_norm(t);
        if denom == 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "truth at step {step} has zero L1 norm"
            )));
        }
        let diff: Vec<f64> = p.iter().zip(t).map(|(a, b)| a - b).collect();
        errors.push(l1_norm(&diff) / denom);
    }
    Ok(errors)
}

/// Mean and population standard deviation per step across sequences.
pub fn aggregate_error_series(series: &[Vec<f64>]) -> Vec<(f64, f64)> {
    assert!(!series.is_empty(), "need at least one series");
    let len = series[0].len();
    assert!(series.iter().all(|s| s.len() == len), "series length mismatch");
    let n = series.len() as f64;
    (0..len)
        .map(|step| {
            let mean = series.iter().map(|s| s[step]).sum::<f64>() / n;
            let var = series
                .iter()
                .map(|s| (s[step] - mean) * (s[step] - mean))
                .sum::<f64>()
                / n;
            (mean, var.sqrt())
        })
        .collect()
}
