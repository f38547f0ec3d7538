//! Surrogate continuous-time environments standing in for a large-scale flow
//! simulation: a system with a known finite-dimensional Koopman invariant
//! subspace, and a mean-field oscillator whose limit cycle plays the role of
//! periodic shedding (its fixed point at the origin is the steady-flow
//! analog). Both are integrated with classical RK4.

mod chirp;
mod dataset;
mod lift;
mod oracle;
mod wake;

pub use chirp::ChirpSchedule;
pub use dataset::{read_dataset, write_dataset, Dataset};
pub use lift::ObservationLift;
pub use oracle::{exact_koopman_operator, lift_observables, OracleSystem};
pub use wake::{MeanFieldWake, Sensor};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::koopman::SnapshotSequence;
use crate::numerics::l2_norm;

/// A continuous-time vector field with a scalar forcing channel.
pub trait Environment {
    fn state_dim(&self) -> usize;
    fn dt(&self) -> f64;
    /// Time derivative at `state` under constant input `u`.
    fn derivative(&self, state: &[f64], u: f64) -> Vec<f64>;
    /// Starting point used by data generation when none is configured.
    fn default_initial_state(&self) -> Vec<f64>;
}

/// Tagged union of the available environments, used by run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurrogateEnv {
    Oracle(OracleSystem),
    MeanFieldWake(MeanFieldWake),
}

impl Environment for SurrogateEnv {
    fn state_dim(&self) -> usize {
        match self {
            SurrogateEnv::Oracle(e) => e.state_dim(),
            SurrogateEnv::MeanFieldWake(e) => e.state_dim(),
        }
    }

    fn dt(&self) -> f64 {
        match self {
            SurrogateEnv::Oracle(e) => e.dt(),
            SurrogateEnv::MeanFieldWake(e) => e.dt(),
        }
    }

    fn derivative(&self, state: &[f64], u: f64) -> Vec<f64> {
        match self {
            SurrogateEnv::Oracle(e) => e.derivative(state, u),
            SurrogateEnv::MeanFieldWake(e) => e.derivative(state, u),
        }
    }

    fn default_initial_state(&self) -> Vec<f64> {
        match self {
            SurrogateEnv::Oracle(e) => e.default_initial_state(),
            SurrogateEnv::MeanFieldWake(e) => e.default_initial_state(),
        }
    }
}

const DIVERGENCE_LIMIT: f64 = 1e6;

/// One classical fourth-order Runge-Kutta step over the environment's dt,
/// with the input held constant across the step (zero-order hold).
pub fn step_rk4(env: &impl Environment, state: &[f64], u: f64) -> Result<Vec<f64>> {
    let h = env.dt();
    let k1 = env.derivative(state, u);
    let k2 = env.derivative(&axpy(state, &k1, h / 2.0), u);
    let k3 = env.derivative(&axpy(state, &k2, h / 2.0), u);
    let k4 = env.derivative(&axpy(state, &k3, h), u);
    let next: Vec<f64> = state
        .iter()
        .enumerate()
        .map(|(i, &s)| s + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if next.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
        return Err(CoreError::Divergence(format!(
            "state left the admissible region after one step from {state:?} with u = {u}"
        )));
    }
    Ok(next)
}

fn axpy(state: &[f64], dir: &[f64], scale: f64) -> Vec<f64> {
    state.iter().zip(dir).map(|(s, d)| s + scale * d).collect()
}

/// Roll the environment forward under the given input signal.
pub fn simulate(env: &impl Environment, x0: &[f64], inputs: &[f64]) -> Result<SnapshotSequence> {
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(x0.to_vec());
    let mut current = x0.to_vec();
    for &u in inputs {
        current = step_rk4(env, &current, u)?;
        states.push(current.clone());
    }
    SnapshotSequence::new(states, inputs.to_vec(), env.dt())
}

/// Norm of the unforced time derivative; zero exactly at a steady state.
pub fn residual(env: &impl Environment, state: &[f64]) -> f64 {
    l2_norm(&env.derivative(state, 0.0))
}

/// Slice one long rollout into overlapping windows of `transitions`
/// transitions with stride 1 (staggered sequences).
pub fn generate_training_data(
    env: &impl Environment,
    schedule: Option<&ChirpSchedule>,
    total_snapshots: usize,
    transitions: usize,
) -> Result<Vec<SnapshotSequence>> {
    if total_snapshots < transitions + 1 {
        return Err(CoreError::InvalidArgument(format!(
            "need at least {} snapshots for {transitions}-step sequences, got {total_snapshots}",
            transitions + 1
        )));
    }
    let inputs = match schedule {
        Some(s) => s.signal(env.dt(), total_snapshots - 1)?,
        None => vec![0.0; total_snapshots - 1],
    };
    let rollout = simulate(env, &env.default_initial_state(), &inputs)?;
    Ok(stagger(&rollout, transitions))
}

/// All stride-1 windows of the given transition count.
pub fn stagger(rollout: &SnapshotSequence, transitions: usize) -> Vec<SnapshotSequence> {
    let count = rollout.states.len().saturating_sub(transitions);
    (0..count).map(|s| rollout.window(s, transitions)).collect()
}

/// Data-collection plan with seeded restarts: several independent rollouts
/// from jittered initial conditions, each driven by its own copy of the
/// excitation schedule. Restarts expose the dynamics from many initial
/// conditions, which matters most for environments that ignore the input.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartPlan {
    pub restarts: usize,
    pub snapshots_per_restart: usize,
    pub base_state: Vec<f64>,
    /// Per-dimension half-width of the uniform initial-condition jitter.
    pub jitter: Vec<f64>,
    pub seed: u64,
}

/// One rollout per restart, in order.
pub fn generate_restart_rollouts(
    env: &impl Environment,
    schedule: Option<&ChirpSchedule>,
    plan: &RestartPlan,
) -> Result<Vec<SnapshotSequence>> {
    if plan.restarts == 0 || plan.snapshots_per_restart < 2 {
        return Err(CoreError::InvalidArgument(
            "restart plan needs at least one restart of two snapshots".to_string(),
        ));
    }
    if plan.base_state.len() != env.state_dim() || plan.jitter.len() != env.state_dim() {
        return Err(CoreError::DimensionMismatch(
            "restart plan state and jitter must match the environment dimension".to_string(),
        ));
    }
    let mut rng = crate::rng::SplitMix64::new(plan.seed).fork("restarts");
    let mut rollouts = Vec::with_capacity(plan.restarts);
    for _ in 0..plan.restarts {
        let x0: Vec<f64> = plan
            .base_state
            .iter()
            .zip(&plan.jitter)
            .map(|(base, j)| base + rng.uniform(-j, *j))
            .collect();
        let inputs = match schedule {
            Some(s) => {
                let segment_schedule = ChirpSchedule {
                    seed: rng.next_u64(),
                    ..s.clone()
                };
                segment_schedule.signal(env.dt(), plan.snapshots_per_restart - 1)?
            }
            None => {
                // Keep the stream position moving so restart counts alone
                // determine the draw sequence.
                let _ = rng.next_u64();
                vec![0.0; plan.snapshots_per_restart - 1]
            }
        };
        rollouts.push(simulate(env, &x0, &inputs)?);
    }
    Ok(rollouts)
}
