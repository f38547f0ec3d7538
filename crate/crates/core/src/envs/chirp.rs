use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::SplitMix64;

/// Excitation signal for data collection: sinusoidal bursts whose frequency
/// rises linearly from `f0` to `f1` across each sweep, separated by rest
/// periods with no input so unforced dynamics appear from many initial
/// conditions. Each repetition starts at a seeded random phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpSchedule {
    pub amplitude: f64,
    /// Start frequency in Hz.
    pub f0: f64,
    /// End frequency in Hz.
    pub f1: f64,
    pub sweep_steps: usize,
    pub rest_steps: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl ChirpSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.amplitude <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "chirp amplitude must be positive".to_string(),
            ));
        }
        if self.f0 > self.f1 {
            return Err(CoreError::InvalidArgument(
                "chirp requires f0 <= f1".to_string(),
            ));
        }
        Ok(())
    }

    /// Input value for every step in [0, len); sweeps past the configured
    /// repetitions are zero.
    pub fn signal(&self, dt: f64, len: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = SplitMix64::new(self.seed);
        let mut out = Vec::with_capacity(len);
        'outer: for _ in 0..self.repetitions {
            let phase0 = rng.uniform(0.0, std::f64::consts::TAU);
            let sweep_time = self.sweep_steps as f64 * dt;
            for k in 0..self.sweep_steps {
                if out.len() == len {
                    break 'outer;
                }
                let t = k as f64 * dt;
                // Instantaneous frequency f0 + (f1 - f0) t / T gives the
                // integrated phase below.
                let phase = phase0
                    + std::f64::consts::TAU
                        * (self.f0 * t + 0.5 * (self.f1 - self.f0) * t * t / sweep_time);
                out.push(self.amplitude * phase.sin());
            }
            for _ in 0..self.rest_steps {
                if out.len() == len {
                    break 'outer;
                }
                out.push(0.0);
            }
        }
        out.resize(len, 0.0);
        Ok(out)
    }
}
