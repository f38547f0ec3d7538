use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::qp::{condense_qp, solve_box_qp};
use crate::envs::{residual, step_rk4, Environment, Sensor};
use crate::error::CoreError;
use crate::koopman::{KoopmanModel, SnapshotSequence};
use crate::numerics::l2_norm;

/// Receding-horizon controller settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcConfig {
    /// Steps of the finite-horizon cost (horizon - 1 decision inputs).
    pub horizon: usize,
    /// Scale of the identity weight on latent deviation.
    pub state_weight: f64,
    /// Penalty on squared inputs; see [`InputPenalty`].
    pub input_penalty: InputPenalty,
    pub u_max: f64,
    /// Goal state in raw coordinates; its encoding is the latent target.
    pub goal_state: Vec<f64>,
    /// Steps of zero input while the state history fills up. Must equal the
    /// model's fit window.
    pub warmup: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 16,
            state_weight: 1.0,
            input_penalty: InputPenalty::Relative { scale: 10.0 },
            u_max: 1.0,
            goal_state: vec![0.0, 0.0],
            warmup: 16,
        }
    }
}

/// Input penalty: either an absolute value, or a multiple of the typical
/// latent deviation measured on warmup data, which keeps the penalty
/// meaningful across models whose latent scales differ by orders of
/// magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputPenalty {
    Absolute { value: f64 },
    Relative { scale: f64 },
}

/// Proportional feedback settings: u = -gain * sensor(state).
///
/// The sign convention makes a positive gain stabilizing at sensor phase
/// zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PControlConfig {
    pub gain: f64,
    pub sensor: Sensor,
}

impl Default for PControlConfig {
    fn default() -> Self {
        Self {
            gain: 0.4,
            sensor: Sensor { phase: 0.0 },
        }
    }
}

/// One logged step of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLogRow {
    pub step: usize,
    pub t: f64,
    pub u: f64,
    pub residual: f64,
    pub latent_cost: f64,
    pub sensor: f64,
}

/// Closed-loop run record; serializes as CSV with columns
/// `step,t,u,residual,latent_cost,sensor`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<RunLogRow>,
}

impl RunLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,t,u,residual,latent_cost,sensor\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step, r.t, r.u, r.residual, r.latent_cost, r.sensor
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> crate::error::Result<RunLog> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l).unwrap_or("");
        if header.trim() != "step,t,u,residual,latent_cost,sensor" {
            return Err(CoreError::Parse {
                line: 1,
                message: format!("unexpected run log header '{header}'"),
            });
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(CoreError::Parse {
                    line: idx + 1,
                    message: format!("expected 6 fields, found {}", fields.len()),
                });
            }
            let parse = |s: &str, what: &str| -> crate::error::Result<f64> {
                s.trim().parse().map_err(|e| CoreError::Parse {
                    line: idx + 1,
                    message: format!("bad {what}: {e}"),
                })
            };
            rows.push(RunLogRow {
                step: fields[0].trim().parse().map_err(|e| CoreError::Parse {
                    line: idx + 1,
                    message: format!("bad step: {e}"),
                })?,
                t: parse(fields[1], "t")?,
                u: parse(fields[2], "u")?,
                residual: parse(fields[3], "residual")?,
                latent_cost: parse(fields[4], "latent_cost")?,
                sensor: parse(fields[5], "sensor")?,
            });
        }
        Ok(RunLog { rows })
    }

    pub fn inputs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.u).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.residual).collect()
    }

    pub fn sensors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.sensor).collect()
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    /// The environment diverged mid-run; the partial log is preserved.
    #[error("run diverged at step {step}: {message}")]
    Diverged {
        step: usize,
        message: String,
        partial: RunLog,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// One receding-horizon step: fit the dynamics from the recent history with
/// the model's global input matrix, condense the finite-horizon cost, solve
/// the box QP, return the first input.
pub fn mpc_step(
    model: &KoopmanModel,
    history: &SnapshotSequence,
    config: &MpcConfig,
    r_value: f64,
) -> crate::error::Result<MpcStep> {
    if config.warmup != model.fit_window {
        return Err(CoreError::InvalidArgument(format!(
            "warmup {} must equal the model fit window {}",
            config.warmup, model.fit_window
        )));
    }
    if history.transitions() != config.warmup {
        return Err(CoreError::DimensionMismatch(format!(
            "history holds {} transitions, warmup needs {}",
            history.transitions(),
            config.warmup
        )));
    }
    let a = model.fit_from_history(&history.states, &history.inputs)?;
    let current = history.states.last().expect("validated: non-empty");
    let c1 = model.encode_state(current)?;
    let c_goal = model.encode_state(&config.goal_state)?;
    let problem = condense_qp(
        &a,
        &model.b,
        &c1,
        &c_goal,
        config.horizon,
        config.state_weight,
        r_value,
        config.u_max,
    )?;
    let solution = solve_box_qp(&problem)?;
    Ok(MpcStep {
        u: solution.u[0],
        converged: solution.converged,
        objective: solution.objective,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct MpcStep {
    pub u: f64,
    pub converged: bool,
    pub objective: f64,
}

/// Full closed-loop MPC run from `x0`.
///
/// The first `warmup` inputs are zero while the history buffer fills;
/// afterwards each step solves the finite-horizon problem and applies the
/// first input. A relative input penalty is resolved once from the warmup
/// latent deviations.
pub fn run_mpc_loop(
    env: &impl Environment,
    model: &KoopmanModel,
    config: &MpcConfig,
    sensor: &Sensor,
    x0: &[f64],
    steps: usize,
) -> std::result::Result<MpcRun, RunError> {
    if steps <= config.warmup {
        return Err(RunError::Core(CoreError::InvalidArgument(format!(
            "steps ({steps}) must exceed the warmup window ({})",
            config.warmup
        ))));
    }
    let c_goal = model.encode_state(&config.goal_state)?;
    let mut log = RunLog::default();
    let mut states: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut inputs: Vec<f64> = Vec::new();
    let mut r_resolved: Option<f64> = None;
    let mut non_converged = 0usize;

    for step in 0..steps {
        let state = states.last().expect("non-empty").clone();
        let latent = model.encode_state(&state)?;
        let latent_cost = l2_norm(
            &latent
                .iter()
                .zip(&c_goal)
                .map(|(c, g)| c - g)
                .collect::<Vec<_>>(),
        );

        let u = if step < config.warmup {
            0.0
        } else {
            let r_value = *r_resolved.get_or_insert_with(|| match config.input_penalty {
                InputPenalty::Absolute { value } => value,
                InputPenalty::Relative { scale } => {
                    // Typical squared latent deviation over the warmup states.
                    let mut acc = 0.0;
                    for s in &states {
                        let c = model.encode_state(s).expect("states already encoded once");
                        let dev: f64 = c
                            .iter()
                            .zip(&c_goal)
                            .map(|(x, g)| (x - g) * (x - g))
                            .sum();
                        acc += dev;
                    }
                    scale * (acc / states.len() as f64) / (config.u_max * config.u_max)
                }
            });
            let window_start = states.len() - 1 - config.warmup;
            let history = SnapshotSequence {
                states: states[window_start..].to_vec(),
                inputs: inputs[window_start..].to_vec(),
                dt: env.dt(),
            };
            let outcome = mpc_step(model, &history, config, r_value)?;
            if !outcome.converged {
                // Logged, input still applied.
                non_converged += 1;
            }
            outcome.u
        };

        log.rows.push(RunLogRow {
            step,
            t: step as f64 * env.dt(),
            u,
            residual: residual(env, &state),
            latent_cost,
            sensor: sensor.measure(&state),
        });

        match step_rk4(env, &state, u) {
            Ok(next) => {
                states.push(next);
                inputs.push(u);
            }
            Err(CoreError::Divergence(message)) => {
                return Err(RunError::Diverged {
                    step,
                    message,
                    partial: log,
                });
            }
            Err(other) => return Err(other.into()),
        }
    }

    Ok(MpcRun {
        log,
        r_value: r_resolved.unwrap_or(0.0),
        non_converged_steps: non_converged,
        final_state: states.last().expect("non-empty").clone(),
    })
}

#[derive(Debug, Clone)]
pub struct MpcRun {
    pub log: RunLog,
    /// Input penalty actually used after resolving a relative setting.
    pub r_value: f64,
    pub non_converged_steps: usize,
    pub final_state: Vec<f64>,
}

/// Pure proportional feedback run: u = -gain * sensor(state) at every step.
/// Logs the same columns as the MPC loop; the latent-cost column is zero
/// because no model is involved.
pub fn run_pcontrol_loop(
    env: &impl Environment,
    config: &PControlConfig,
    x0: &[f64],
    steps: usize,
) -> std::result::Result<RunLog, RunError> {
    if steps == 0 {
        return Err(RunError::Core(CoreError::InvalidArgument(
            "need at least one step".to_string(),
        )));
    }
    if !config.gain.is_finite() {
        return Err(RunError::Core(CoreError::InvalidArgument(
            "gain must be finite".to_string(),
        )));
    }
    let mut log = RunLog::default();
    let mut state = x0.to_vec();
    for step in 0..steps {
        let s = config.sensor.measure(&state);
        let u = -config.gain * s;
        log.rows.push(RunLogRow {
            step,
            t: step as f64 * env.dt(),
            u,
            residual: residual(env, &state),
            latent_cost: 0.0,
            sensor: s,
        });
        match step_rk4(env, &state, u) {
            Ok(next) => state = next,
            Err(CoreError::Divergence(message)) => {
                return Err(RunError::Diverged {
                    step,
                    message,
                    partial: log,
                });
            }
            Err(other) => return Err(other.into()),
        }
    }
    Ok(log)
}

/// Pearson correlation coefficient of two equal-length series.
pub fn correlation(a: &[f64], b: &[f64]) -> crate::error::Result<f64> {
    if a.len() != b.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "series lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(CoreError::InvalidArgument(
            "correlation needs at least two samples".to_string(),
        ));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(CoreError::InvalidArgument(
            "correlation is undefined for a zero-variance series".to_string(),
        ));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Moving average over a centered-causal window, for smoothing oscillatory
/// residual series before monotonicity checks.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1);
    if series.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(series.len() - window + 1);
    let mut acc: f64 = series[..window].iter().sum();
    out.push(acc / window as f64);
    for i in window..series.len() {
        acc += series[i] - series[i - window];
        out.push(acc / window as f64);
    }
    out
}
