use serde::{Deserialize, Serialize};

use crate::envs::Environment;

/// Mean-field oscillator with a stable limit cycle of radius sqrt(sigma):
///
///   x' = sigma * x - omega * y - (x^2 + y^2) x
///   y' = omega * x + sigma * y - (x^2 + y^2) y + gamma * u
///
/// The periodic orbit is the shedding analog; the unstable fixed point at
/// the origin is the steady-flow analog the controller drives toward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanFieldWake {
    /// Linear growth rate; the limit cycle radius is sqrt(sigma).
    pub sigma: f64,
    /// Rotation frequency in rad/s.
    pub omega: f64,
    /// Input gain on the second state component.
    pub gamma: f64,
    pub dt: f64,
}

impl Default for MeanFieldWake {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            omega: 1.0,
            gamma: 1.0,
            dt: 0.05,
        }
    }
}

impl MeanFieldWake {
    pub fn validate(&self) -> crate::error::Result<()> {
        if self.sigma <= 0.0 {
            return Err(crate::error::CoreError::InvalidArgument(
                "wake requires sigma > 0 so a limit cycle exists".to_string(),
            ));
        }
        if self.omega == 0.0 {
            return Err(crate::error::CoreError::InvalidArgument(
                "wake requires omega != 0".to_string(),
            ));
        }
        if self.dt <= 0.0 || self.dt * self.omega.abs() >= 0.5 {
            return Err(crate::error::CoreError::InvalidArgument(
                "wake requires 0 < dt * omega < 0.5".to_string(),
            ));
        }
        Ok(())
    }

    /// Point on the limit cycle at angle zero.
    pub fn limit_cycle_state(&self) -> Vec<f64> {
        vec![self.sigma.sqrt(), 0.0]
    }
}

impl Environment for MeanFieldWake {
    fn state_dim(&self) -> usize {
        2
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn derivative(&self, state: &[f64], u: f64) -> Vec<f64> {
        let (x, y) = (state[0], state[1]);
        let r2 = x * x + y * y;
        vec![
            self.sigma * x - self.omega * y - r2 * x,
            self.omega * x + self.sigma * y - r2 * y + self.gamma * u,
        ]
    }

    fn default_initial_state(&self) -> Vec<f64> {
        self.limit_cycle_state()
    }
}

/// Pointwise measurement of the wake state: s = cos(phase) * y - sin(phase) * x.
///
/// Phase zero reads the component the input drives; a phase-pi sensor reads
/// its negation, the analog of probing the wrong location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sensor {
    pub phase: f64,
}

impl Sensor {
    pub fn measure(&self, state: &[f64]) -> f64 {
        self.phase.cos() * state[1] - self.phase.sin() * state[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sensor_phases() {
        let state = [0.3, -0.7];
        assert_eq!(Sensor { phase: 0.0 }.measure(&state), -0.7);
        let anti = Sensor {
            phase: std::f64::consts::PI,
        }
        .measure(&state);
        assert!((anti - 0.7).abs() < 1e-15);
        let quarter = Sensor {
            phase: std::f64::consts::FRAC_PI_2,
        }
        .measure(&state);
        assert!((quarter + 0.3).abs() < 1e-15);
    }

    #[test]
    fn validation_bounds() {
        assert!(MeanFieldWake::default().validate().is_ok());
        assert!(MeanFieldWake {
            sigma: -0.1,
            ..MeanFieldWake::default()
        }
        .validate()
        .is_err());
        assert!(MeanFieldWake {
            dt: 0.6,
            ..MeanFieldWake::default()
        }
        .validate()
        .is_err());
    }
}
