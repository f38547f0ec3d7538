use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{DenseNetSpec, NetParams};
use crate::error::{CoreError, Result};
use crate::koopman::model::{KoopmanModel, Normalization, TrainingConfig};
use crate::numerics::Matrix;

const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<&Matrix> for MatrixRepr {
    fn from(m: &Matrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().to_vec(),
        }
    }
}

impl MatrixRepr {
    fn into_matrix(self) -> Result<Matrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(CoreError::Serialization(format!(
                "matrix payload holds {} values for a {}x{} shape",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(Matrix::from_vec(self.rows, self.cols, self.data))
    }
}

/// On-disk model bundle. JSON with shortest-round-trip float encoding, so a
/// save/load cycle reproduces every parameter bit-exactly.
#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    schema_version: u32,
    encoder_spec: DenseNetSpec,
    decoder_spec: DenseNetSpec,
    encoder_weights: Vec<MatrixRepr>,
    encoder_biases: Vec<MatrixRepr>,
    decoder_weights: Vec<MatrixRepr>,
    decoder_biases: Vec<MatrixRepr>,
    latent_dim: usize,
    input_matrix: MatrixRepr,
    norm_mean: Vec<f64>,
    norm_std: Vec<f64>,
    fit_window: usize,
    tikhonov_eps: f64,
    /// Training configuration echoed alongside the parameters.
    config_echo: Option<TrainingConfig>,
}

pub fn save_checkpoint(
    model: &KoopmanModel,
    config_echo: Option<&TrainingConfig>,
    path: &Path,
) -> Result<()> {
    let file = CheckpointFile {
        schema_version: CHECKPOINT_SCHEMA,
        encoder_spec: model.encoder_spec.clone(),
        decoder_spec: model.decoder_spec.clone(),
        encoder_weights: model.encoder.weights.iter().map(MatrixRepr::from).collect(),
        encoder_biases: model.encoder.biases.iter().map(MatrixRepr::from).collect(),
        decoder_weights: model.decoder.weights.iter().map(MatrixRepr::from).collect(),
        decoder_biases: model.decoder.biases.iter().map(MatrixRepr::from).collect(),
        latent_dim: model.latent_dim,
        input_matrix: MatrixRepr::from(&model.b),
        norm_mean: model.normalization.mean.clone(),
        norm_std: model.normalization.std.clone(),
        fit_window: model.fit_window,
        tikhonov_eps: model.tikhonov_eps,
        config_echo: config_echo.cloned(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| CoreError::Serialization(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(KoopmanModel, Option<TrainingConfig>)> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| CoreError::Serialization(format!("bad checkpoint: {e}")))?;
    if file.schema_version != CHECKPOINT_SCHEMA {
        return Err(CoreError::Serialization(format!(
            "checkpoint schema {} is not supported (expected {CHECKPOINT_SCHEMA})",
            file.schema_version
        )));
    }
    let to_params = |weights: Vec<MatrixRepr>, biases: Vec<MatrixRepr>| -> Result<NetParams> {
        Ok(NetParams {
            weights: weights
                .into_iter()
                .map(MatrixRepr::into_matrix)
                .collect::<Result<_>>()?,
            biases: biases
                .into_iter()
                .map(MatrixRepr::into_matrix)
                .collect::<Result<_>>()?,
        })
    };
    let encoder = to_params(file.encoder_weights, file.encoder_biases)?;
    let decoder = to_params(file.decoder_weights, file.decoder_biases)?;
    if !encoder.matches_spec(&file.encoder_spec) || !decoder.matches_spec(&file.decoder_spec) {
        return Err(CoreError::Serialization(
            "checkpoint parameter shapes do not match the declared specs".to_string(),
        ));
    }
    let model = KoopmanModel {
        encoder_spec: file.encoder_spec,
        decoder_spec: file.decoder_spec,
        encoder,
        decoder,
        latent_dim: file.latent_dim,
        b: file.input_matrix.into_matrix()?,
        normalization: Normalization {
            mean: file.norm_mean,
            std: file.norm_std,
        },
        fit_window: file.fit_window,
        tikhonov_eps: file.tikhonov_eps,
        last_fit_a: None,
    };
    Ok((model, file.config_echo))
}
