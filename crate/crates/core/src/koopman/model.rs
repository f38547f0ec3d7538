use serde::{Deserialize, Serialize};

use crate::autodiff::{forward, DenseNetSpec, NetParams};
use crate::error::{CoreError, Result};
use crate::koopman::SnapshotSequence;
use crate::numerics::{tikhonov_lstsq, Matrix};

/// Per-dimension affine normalization applied to states before encoding and
/// inverted after decoding. Fitted on the training set and stored with the
/// model so predictions work in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit(sequences: &[SnapshotSequence]) -> Self {
        let dim = sequences[0].state_dim();
        let mut count = 0usize;
        let mut mean = vec![0.0; dim];
        for seq in sequences {
            for state in &seq.states {
                for d in 0..dim {
                    mean[d] += state[d];
                }
                count += 1;
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; dim];
        for seq in sequences {
            for state in &seq.states {
                for d in 0..dim {
                    let delta = state[d] - mean[d];
                    var[d] += delta * delta;
                }
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / count as f64).sqrt();
                // Constant dimensions would otherwise divide by zero.
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn normalize_state(&self, state: &[f64]) -> Vec<f64> {
        state
            .iter()
            .enumerate()
            .map(|(d, v)| (v - self.mean[d]) / self.std[d])
            .collect()
    }

    pub fn denormalize_state(&self, state: &[f64]) -> Vec<f64> {
        state
            .iter()
            .enumerate()
            .map(|(d, v)| v * self.std[d] + self.mean[d])
            .collect()
    }

    /// Normalize a matrix whose columns are states.
    pub fn normalize_matrix(&self, m: &Matrix) -> Matrix {
        Matrix::from_fn(m.rows(), m.cols(), |i, j| {
            (m[(i, j)] - self.mean[i]) / self.std[i]
        })
    }

    pub fn denormalize_matrix(&self, m: &Matrix) -> Matrix {
        Matrix::from_fn(m.rows(), m.cols(), |i, j| {
            m[(i, j)] * self.std[i] + self.mean[i]
        })
    }
}

/// Training hyperparameters and architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Transitions per training sequence (sequences hold one more state).
    pub sequence_length: usize,
    /// Columns used for the least-squares fit; the remaining columns of the
    /// rollout are pure predictions.
    pub fit_window: usize,
    pub latent_dim: usize,
    /// Hidden layer widths shared by encoder and decoder (reversed for the
    /// decoder).
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub l2_weight: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Ridge strength of the differentiable fit inside the training loss.
    /// Large enough to damp the dynamics fit while the encoder is still
    /// random; shrink bias during training is compensated by the learned
    /// feature scale.
    pub tikhonov_eps: f64,
    /// Ridge strength for fits on the trained model (prediction and
    /// control). Kept much smaller than the training value because shrink
    /// bias compounds over long rollouts.
    pub refit_eps: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            sequence_length: 32,
            fit_window: 16,
            latent_dim: 32,
            hidden_layers: vec![32, 32],
            learning_rate: 1e-3,
            l2_weight: 1e-6,
            epochs: 100,
            batch_size: 16,
            tikhonov_eps: 1e-6,
            refit_eps: 1e-9,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sequence_length < 2 {
            return Err(CoreError::InvalidArgument(
                "sequence_length must be at least 2".to_string(),
            ));
        }
        if self.fit_window == 0 || self.fit_window > self.sequence_length {
            return Err(CoreError::InvalidArgument(
                "fit_window must be in [1, sequence_length]".to_string(),
            ));
        }
        if self.latent_dim == 0 {
            return Err(CoreError::InvalidArgument(
                "latent_dim must be at least 1".to_string(),
            ));
        }
        if self.tikhonov_eps <= 0.0 || self.refit_eps <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "tikhonov_eps and refit_eps must be positive".to_string(),
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(CoreError::InvalidArgument(
                "epochs and batch_size must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Scale applied to the encoder's output layer at initialization; see
/// [`KoopmanModel::init`].
const INITIAL_FEATURE_SCALE: f64 = 0.01;

/// Learned observables with linear latent dynamics.
///
/// The dynamics matrix is never a stored trainable parameter: it is refit by
/// least squares from encoded history wherever it is needed (per sequence
/// during training, per step under control). The input matrix `b` is global
/// and trained by gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    pub encoder_spec: DenseNetSpec,
    pub decoder_spec: DenseNetSpec,
    pub encoder: NetParams,
    pub decoder: NetParams,
    pub latent_dim: usize,
    /// Global input matrix, latent_dim x input channels (zero columns for a
    /// strictly unforced model).
    pub b: Matrix,
    pub normalization: Normalization,
    pub fit_window: usize,
    pub tikhonov_eps: f64,
    /// Dynamics matrix from the most recent fit, kept for inspection.
    pub last_fit_a: Option<Matrix>,
}

impl KoopmanModel {
    /// Fresh model with seeded parameters and a zero input matrix.
    pub fn init(state_dim: usize, config: &TrainingConfig) -> Result<Self> {
        config.validate()?;
        let mut enc_layers = vec![state_dim];
        enc_layers.extend_from_slice(&config.hidden_layers);
        enc_layers.push(config.latent_dim);
        let mut dec_layers = vec![config.latent_dim];
        dec_layers.extend(config.hidden_layers.iter().rev().copied());
        dec_layers.push(state_dim);

        let mut rng = crate::rng::SplitMix64::new(config.seed);
        let encoder_spec = DenseNetSpec::new(enc_layers, rng.fork("encoder-init").next_u64())?;
        let decoder_spec = DenseNetSpec::new(dec_layers, rng.fork("decoder-init").next_u64())?;
        let mut encoder = encoder_spec.init_params();
        // Start the latent features small: with tiny features the ridge
        // term dominates the dynamics fit and the initial fitted matrix is
        // strongly damped, so the recursive rollout cannot explode before
        // the encoder has learned anything. Feature scale recovers during
        // training as the fit becomes trustworthy.
        let last = encoder.weights.len() - 1;
        encoder.weights[last] = encoder.weights[last].scale(INITIAL_FEATURE_SCALE);
        let decoder = decoder_spec.init_params();
        Ok(Self {
            encoder_spec,
            decoder_spec,
            encoder,
            decoder,
            latent_dim: config.latent_dim,
            b: Matrix::zeros(config.latent_dim, 1),
            normalization: Normalization::identity(state_dim),
            fit_window: config.fit_window,
            tikhonov_eps: config.tikhonov_eps,
            last_fit_a: None,
        })
    }

    /// Linear configuration whose encoder and decoder are exact identities
    /// (single layer, identity weights, zero bias, identity normalization).
    /// On systems that are linear in the raw state this makes the latent
    /// fit an exact recovery problem.
    pub fn identity_linear(state_dim: usize, fit_window: usize, tikhonov_eps: f64) -> Self {
        let spec = DenseNetSpec::new(vec![state_dim, state_dim], 0).expect("two layers");
        let params = NetParams {
            weights: vec![Matrix::identity(state_dim)],
            biases: vec![Matrix::zeros(state_dim, 1)],
        };
        Self {
            encoder_spec: spec.clone(),
            decoder_spec: spec,
            encoder: params.clone(),
            decoder: params,
            latent_dim: state_dim,
            b: Matrix::zeros(state_dim, 1),
            normalization: Normalization::identity(state_dim),
            fit_window,
            tikhonov_eps,
            last_fit_a: None,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.encoder_spec.input_dim()
    }

    /// Encode a matrix of raw states (columns) into latent coordinates.
    pub fn encode(&self, states: &Matrix) -> Result<Matrix> {
        let normalized = self.normalization.normalize_matrix(states);
        forward(&self.encoder_spec, &self.encoder, &normalized)
    }

    pub fn encode_state(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encode(&Matrix::column_vector(state))?.column(0))
    }

    /// Decode latent columns back to raw states.
    pub fn decode(&self, latents: &Matrix) -> Result<Matrix> {
        let decoded = forward(&self.decoder_spec, &self.decoder, latents)?;
        Ok(self.normalization.denormalize_matrix(&decoded))
    }

    /// Encoded snapshot matrices: column-wise application of the encoder.
    pub fn encode_matrices(&self, x: &Matrix, y: &Matrix) -> Result<(Matrix, Matrix)> {
        Ok((self.encode(x)?, self.encode(y)?))
    }

    /// Fit the dynamics matrix from a history of fit_window transitions,
    /// using the model's global input matrix.
    ///
    /// The ridge is scaled relative to the window's feature energy, and for
    /// a trained model it is centered on the operator cached from training:
    /// directions the window excites are fit by least squares, directions it
    /// barely excites inherit the trained dynamics instead of noise. A
    /// zero-centered ridge is recovered when no cached operator exists.
    pub fn fit_from_history(&self, states: &[Vec<f64>], inputs: &[f64]) -> Result<Matrix> {
        if states.len() != self.fit_window + 1 {
            return Err(CoreError::DimensionMismatch(format!(
                "history must hold fit_window + 1 = {} states, got {}",
                self.fit_window + 1,
                states.len()
            )));
        }
        if inputs.len() != self.fit_window {
            return Err(CoreError::DimensionMismatch(format!(
                "history must hold fit_window = {} inputs, got {}",
                self.fit_window,
                inputs.len()
            )));
        }
        let encoded = self.encode(&Matrix::from_columns(states))?;
        let xw = encoded.slice_cols(0, self.fit_window);
        let yw = encoded.slice_cols(1, self.fit_window);
        let gamma = Matrix::from_fn(1, self.fit_window, |_, j| inputs[j]);
        let y_eff = if self.b.cols() == 0 {
            yw
        } else {
            yw.sub(&self.b.matmul(&gamma))
        };

        let gram = xw.matmul(&xw.transpose());
        let trace: f64 = (0..gram.rows()).map(|i| gram[(i, i)]).sum();
        let eps = (self.tikhonov_eps * trace / self.latent_dim as f64).max(f64::MIN_POSITIVE);
        let mut regularized = gram;
        for i in 0..regularized.rows() {
            regularized[(i, i)] += eps;
        }
        let mut rhs = xw.matmul(&y_eff.transpose());
        if let Some(center) = &self.last_fit_a {
            let centered = center.transpose().scale(eps);
            rhs = rhs.add(&centered);
        }
        Ok(crate::numerics::solve_spd(&regularized, &rhs)?.transpose())
    }

    /// Multi-step prediction: fit the dynamics on the warmup window, roll the
    /// latent state forward under the future inputs, decode.
    pub fn predict(
        &self,
        warmup: &SnapshotSequence,
        future_inputs: &[f64],
        horizon: usize,
    ) -> Result<Prediction> {
        if horizon == 0 {
            return Err(CoreError::InvalidArgument(
                "prediction horizon must be at least 1".to_string(),
            ));
        }
        if self.b.cols() > 0 && future_inputs.len() != horizon {
            return Err(CoreError::DimensionMismatch(format!(
                "need {horizon} future inputs, got {}",
                future_inputs.len()
            )));
        }
        let a = self.fit_from_history(&warmup.states, &warmup.inputs)?;
        let last = warmup.states.last().expect("validated: non-empty");
        let seed = self.encode_state(last)?;
        let latents = rollout_latent(&a, &self.b, &seed, future_inputs, horizon)?;
        let decoded = self.decode(&latents)?;
        let states = (0..horizon).map(|t| decoded.column(t)).collect();
        Ok(Prediction { states, a })
    }
}

/// Output of [`KoopmanModel::predict`]: predicted raw states (one per
/// horizon step) and the dynamics matrix fitted from the warmup window.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub states: Vec<Vec<f64>>,
    pub a: Matrix,
}

/// Least-squares latent dynamics fit on the fit-window columns.
pub fn fit_a_unforced(xw: &Matrix, yw: &Matrix, eps: f64) -> Result<Matrix> {
    tikhonov_lstsq(xw, yw, eps)
}

/// Forced fit: subtract the known input contribution, then fit as unforced.
pub fn fit_a_forced(
    xw: &Matrix,
    yw: &Matrix,
    gamma_w: &Matrix,
    b: &Matrix,
    eps: f64,
) -> Result<Matrix> {
    // A zero-channel input matrix means the model is strictly unforced and
    // the input record is ignored.
    if b.cols() == 0 {
        return tikhonov_lstsq(xw, yw, eps);
    }
    if b.cols() != gamma_w.rows() {
        return Err(CoreError::DimensionMismatch(format!(
            "input matrix has {} channels but input rows are {}",
            b.cols(),
            gamma_w.rows()
        )));
    }
    if gamma_w.cols() != xw.cols() {
        return Err(CoreError::DimensionMismatch(format!(
            "input matrix spans {} steps but fit window has {}",
            gamma_w.cols(),
            xw.cols()
        )));
    }
    tikhonov_lstsq(xw, &yw.sub(&b.matmul(gamma_w)), eps)
}

/// Recursive latent rollout: column t holds c_{t+1} where c_1 is the seed
/// and c_{t+1} = A c_t + B u_t.
pub fn rollout_latent(
    a: &Matrix,
    b: &Matrix,
    seed: &[f64],
    inputs: &[f64],
    steps: usize,
) -> Result<Matrix> {
    if a.rows() != a.cols() || a.rows() != seed.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "dynamics matrix is {}x{} but seed has dimension {}",
            a.rows(),
            a.cols(),
            seed.len()
        )));
    }
    let forced = b.cols() > 0;
    if forced && inputs.len() != steps {
        return Err(CoreError::DimensionMismatch(format!(
            "rollout of {steps} steps needs {steps} inputs, got {}",
            inputs.len()
        )));
    }
    let mut out = Matrix::zeros(seed.len(), steps);
    let mut current = seed.to_vec();
    for t in 0..steps {
        let mut next = a.matvec(&current);
        if forced {
            for i in 0..next.len() {
                next[i] += b[(i, 0)] * inputs[t];
            }
        }
        out.set_column(t, &next);
        current = next;
    }
    Ok(out)
}
