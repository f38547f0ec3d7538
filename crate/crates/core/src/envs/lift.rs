use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::koopman::SnapshotSequence;
use crate::rng::SplitMix64;

/// Fixed, seeded smooth map from the 2-D environment state to a higher
/// dimensional observation, for exercising the encoder on wide inputs.
/// Each output channel mixes linear, sinusoidal, and bilinear terms with
/// coefficients drawn once from the seed. Off by default in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationLift {
    pub dim: usize,
    pub seed: u64,
}

impl ObservationLift {
    fn coefficients(&self) -> Vec<[f64; 6]> {
        let mut rng = SplitMix64::new(self.seed);
        (0..self.dim)
            .map(|_| {
                [
                    rng.uniform(-1.0, 1.0),
                    rng.uniform(-1.0, 1.0),
                    rng.uniform(-1.0, 1.0),
                    rng.uniform(-1.0, 1.0),
                    rng.uniform(-1.0, 1.0),
                    rng.uniform(-0.5, 0.5),
                ]
            })
            .collect()
    }

    pub fn apply(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != 2 {
            return Err(CoreError::DimensionMismatch(format!(
                "observation lift expects 2-D states, got {}",
                state.len()
            )));
        }
        let (x, y) = (state[0], state[1]);
        Ok(self
            .coefficients()
            .iter()
            .map(|[a, b, c, w0, w1, q]| a * x + b * y + c * (w0 * x + w1 * y).sin() + q * x * y)
            .collect())
    }

    pub fn apply_sequence(&self, seq: &SnapshotSequence) -> Result<SnapshotSequence> {
        let states = seq
            .states
            .iter()
            .map(|s| self.apply(s))
            .collect::<Result<Vec<_>>>()?;
        SnapshotSequence::new(states, seq.inputs.clone(), seq.dt)
    }
}
