use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use koopman_core::control::{MpcConfig, PControlConfig};
use koopman_core::envs::{ChirpSchedule, ObservationLift, SurrogateEnv};
use koopman_core::koopman::TrainingConfig;

pub const CONFIG_SCHEMA: u32 = 1;

/// Declarative run configuration. One file may carry the sections for
/// several commands; each command requires its own section. Unknown keys
/// are rejected everywhere, the seed is mandatory, and relative paths are
/// resolved against the config file's directory before execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<SurrogateEnv>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpc: Option<MpcSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pctl: Option<PctlSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportSection>,
}

/// Dataset generation: one long rollout sliced into staggered training
/// windows plus longer held-out windows from the tail region.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub total_snapshots: usize,
    /// Transitions per training sequence.
    pub sequence_length: usize,
    /// Training windows kept after seeded subsampling.
    pub train_sequences: usize,
    /// Held-out windows for evaluation.
    pub test_sequences: usize,
    /// Prediction steps the held-out windows must support beyond the
    /// warmup (their length is fit_window + test_horizon transitions).
    pub test_horizon: usize,
    /// Warmup transitions included in held-out windows.
    pub fit_window: usize,
    /// Fraction of the rollout reserved for training windows; the
    /// remainder holds the test windows. With restarts, the split applies
    /// at segment granularity.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Independent rollouts from jittered initial conditions. One long
    /// rollout when 1 (the default).
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Per-dimension half-width of the initial-condition jitter used by
    /// restarts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ic_jitter: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chirp: Option<ChirpSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_lift: Option<ObservationLift>,
}

fn default_restarts() -> usize {
    1
}

fn default_train_fraction() -> f64 {
    0.75
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    /// Training dataset CSV (written by gen-data).
    pub dataset: PathBuf,
    #[serde(default)]
    pub objective: Objective,
    pub config: TrainingConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Recursive,
    SingleStep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub source: EvalSource,
    /// Held-out dataset CSV.
    pub dataset: PathBuf,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "default_num_sequences")]
    pub num_sequences: usize,
}

fn default_horizons() -> Vec<usize> {
    vec![32, 64, 128]
}

fn default_num_sequences() -> usize {
    20
}

/// What produces the predictions under evaluation: a trained checkpoint or
/// a least-squares fit on raw states over the training data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalSource {
    Checkpoint { path: PathBuf },
    Dmd { train_dataset: PathBuf, fit_window: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSection {
    pub checkpoint: PathBuf,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    #[serde(default = "default_sensor_phase")]
    pub sensor_phase: f64,
    pub config: MpcConfig,
}

fn default_sensor_phase() -> f64 {
    0.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PctlSection {
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    pub config: PControlConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// Labeled metrics CSVs to merge into the error-vs-step table.
    #[serde(default)]
    pub error_metrics: Vec<LabeledPath>,
    /// Closed-loop run log for residual and input/sensor series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpc_log: Option<PathBuf>,
    /// Gain used to scale the sensor trace in the overlay.
    #[serde(default = "default_overlay_gain")]
    pub overlay_gain: f64,
    /// Additional run logs (for example proportional-control sweeps) whose
    /// residual series join the residual-vs-step table.
    #[serde(default)]
    pub extra_logs: Vec<LabeledPath>,
}

fn default_overlay_gain() -> f64 {
    0.4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledPath {
    pub label: String,
    pub path: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        if config.schema_version != CONFIG_SCHEMA {
            return Err(format!(
                "config schema_version {} is not supported (expected {CONFIG_SCHEMA})",
                config.schema_version
            ));
        }
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    /// Resolve every path in the config relative to the config directory.
    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        if let Some(t) = &mut self.training {
            resolve(&mut t.dataset);
        }
        if let Some(e) = &mut self.eval {
            resolve(&mut e.dataset);
            match &mut e.source {
                EvalSource::Checkpoint { path } => resolve(path),
                EvalSource::Dmd { train_dataset, .. } => resolve(train_dataset),
            }
        }
        if let Some(m) = &mut self.mpc {
            resolve(&mut m.checkpoint);
        }
        if let Some(r) = &mut self.report {
            for lp in &mut r.error_metrics {
                resolve(&mut lp.path);
            }
            if let Some(p) = &mut r.mpc_log {
                resolve(p);
            }
            for lp in &mut r.extra_logs {
                resolve(&mut lp.path);
            }
        }
    }
}
