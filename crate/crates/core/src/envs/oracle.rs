use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::numerics::{matrix_exp, Matrix};

/// Stable two-dimensional system whose observables (x0, x1, x0^2) span an
/// exactly invariant subspace of the Koopman operator:
///
///   x0' = mu * x0
///   x1' = lambda * (x1 - x0^2)
///
/// This gives every learning and prediction claim a closed-form ground
/// truth. The forcing channel is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSystem {
    pub mu: f64,
    pub lambda: f64,
    pub dt: f64,
}

impl Default for OracleSystem {
    fn default() -> Self {
        Self {
            mu: -0.05,
            lambda: -1.0,
            dt: 0.02,
        }
    }
}

impl OracleSystem {
    pub fn validate(&self) -> crate::error::Result<()> {
        if self.mu >= 0.0 || self.lambda >= 0.0 {
            return Err(crate::error::CoreError::InvalidArgument(
                "oracle system requires mu < 0 and lambda < 0".to_string(),
            ));
        }
        if self.dt <= 0.0 {
            return Err(crate::error::CoreError::InvalidArgument(
                "oracle system requires dt > 0".to_string(),
            ));
        }
        Ok(())
    }
}

impl Environment for OracleSystem {
    fn state_dim(&self) -> usize {
        2
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn derivative(&self, state: &[f64], _u: f64) -> Vec<f64> {
        vec![
            self.mu * state[0],
            self.lambda * (state[1] - state[0] * state[0]),
        ]
    }

    fn default_initial_state(&self) -> Vec<f64> {
        vec![1.4, -0.6]
    }
}

/// Lift a state to the invariant observables (x0, x1, x0^2).
pub fn lift_observables(state: &[f64]) -> Vec<f64> {
    vec![state[0], state[1], state[0] * state[0]]
}

/// Exact one-step Koopman operator on the observables (x0, x1, x0^2).
///
/// The generator on that subspace is
///   [ mu      0       0    ]
///   [ 0     lambda -lambda ]
///   [ 0       0      2 mu  ]
/// and the discrete operator is its exponential over one timestep.
pub fn exact_koopman_operator(env: &OracleSystem) -> Matrix {
    let generator = Matrix::from_rows(&[
        vec![env.mu, 0.0, 0.0],
        vec![0.0, env.lambda, -env.lambda],
        vec![0.0, 0.0, 2.0 * env.mu],
    ]);
    matrix_exp(&generator, env.dt)
}
