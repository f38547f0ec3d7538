use thiserror::Error;

use crate::autodiff::{
    forward_on_tape, l2_penalty_on_tape, AdamConfig, AdamState, NetParamIds, NodeId, Tape,
};
use crate::error::CoreError;
use crate::koopman::model::{KoopmanModel, Normalization, TrainingConfig};
use crate::koopman::{build_matrices, SnapshotSequence};
use crate::numerics::Matrix;
use crate::rng::SplitMix64;

/// How the latent predictions that enter the loss are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainObjective {
    /// Fit the dynamics on the first fit_window columns and unroll them
    /// recursively from the first mapping, so the tail of every training
    /// sequence is a genuine multi-step prediction.
    Recursive,
    /// Fit on all columns and predict each column independently one step
    /// ahead (the single-step baseline).
    SingleStep,
}

#[derive(Debug, Error)]
pub enum TrainError {
    /// The loss left the finite range; the report carries the parameters
    /// from the last completed epoch.
    #[error("training aborted with non-finite loss at epoch {epoch}")]
    NanAbort {
        epoch: usize,
        last_good: Box<TrainReport>,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Trained model plus the per-epoch loss history.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: KoopmanModel,
    pub history: Vec<f64>,
}

/// Flatten trainable tensors in the documented order: encoder weights,
/// encoder biases, decoder weights, decoder biases, input matrix.
pub fn flat_params(model: &KoopmanModel) -> Vec<Matrix> {
    let mut flat = Vec::new();
    flat.extend(model.encoder.weights.iter().cloned());
    flat.extend(model.encoder.biases.iter().cloned());
    flat.extend(model.decoder.weights.iter().cloned());
    flat.extend(model.decoder.biases.iter().cloned());
    flat.push(model.b.clone());
    flat
}

/// Inverse of [`flat_params`].
pub fn write_flat_params(model: &mut KoopmanModel, flat: &[Matrix]) {
    let ne = model.encoder.weights.len();
    let nd = model.decoder.weights.len();
    assert_eq!(flat.len(), 2 * ne + 2 * nd + 1, "flat parameter count mismatch");
    let mut it = flat.iter().cloned();
    model.encoder.weights = (&mut it).take(ne).collect();
    model.encoder.biases = (&mut it).take(ne).collect();
    model.decoder.weights = (&mut it).take(nd).collect();
    model.decoder.biases = (&mut it).take(nd).collect();
    model.b = it.next().expect("checked length");
}

struct TapeParams {
    ids: Vec<NodeId>,
    enc: NetParamIds,
    dec: NetParamIds,
    b: NodeId,
}

fn register_flat(tape: &mut Tape, model: &KoopmanModel, flat: &[Matrix]) -> TapeParams {
    let ids: Vec<NodeId> = flat.iter().map(|p| tape.leaf(p.clone())).collect();
    let ne = model.encoder.weights.len();
    let nd = model.decoder.weights.len();
    TapeParams {
        enc: NetParamIds {
            weights: ids[..ne].to_vec(),
            biases: ids[ne..2 * ne].to_vec(),
        },
        dec: NetParamIds {
            weights: ids[2 * ne..2 * ne + nd].to_vec(),
            biases: ids[2 * ne + nd..2 * ne + 2 * nd].to_vec(),
        },
        b: ids[2 * ne + 2 * nd],
        ids,
    }
}

struct SequenceLossNodes {
    loss: NodeId,
    fitted_a: NodeId,
}

/// Record the loss of one sequence on the tape.
///
/// Everything happens in normalized coordinates: the encoder maps the
/// normalized snapshot matrices to latent matrices, the dynamics matrix is
/// fit by ridge-regularized least squares through a differentiable SPD
/// solve, predictions are decoded, and the loss is the reconstruction error
/// plus the prediction error, averaged over the sequence columns.
fn sequence_loss_on_tape(
    tape: &mut Tape,
    model: &KoopmanModel,
    params: &TapeParams,
    x_norm: &Matrix,
    y_norm: &Matrix,
    gamma: &Matrix,
    objective: TrainObjective,
) -> crate::error::Result<SequenceLossNodes> {
    let t = x_norm.cols();
    let fit_cols = match objective {
        TrainObjective::Recursive => model.fit_window.min(t),
        TrainObjective::SingleStep => t,
    };

    let x_leaf = tape.leaf(x_norm.clone());
    let y_leaf = tape.leaf(y_norm.clone());
    let gamma_leaf = tape.leaf(gamma.clone());
    let gamma_w_leaf = tape.leaf(gamma.slice_cols(0, fit_cols));

    let x_latent = forward_on_tape(tape, &model.encoder_spec, &params.enc, x_leaf);
    let y_latent = forward_on_tape(tape, &model.encoder_spec, &params.enc, y_leaf);

    // Ridge-regularized fit A = (Yw - B Gw) Xw^T (Xw Xw^T + eps I)^-1 as a
    // differentiable graph.
    let xw = tape.slice_cols(x_latent, 0, fit_cols);
    let yw = tape.slice_cols(y_latent, 0, fit_cols);
    let bu_w = tape.matmul(params.b, gamma_w_leaf);
    let y_eff = tape.sub(yw, bu_w);
    let xw_t = tape.transpose(xw);
    let gram = tape.matmul(xw, xw_t);
    let ridge = tape.leaf(Matrix::identity(model.latent_dim).scale(model.tikhonov_eps));
    let gram_reg = tape.add(gram, ridge);
    let y_eff_t = tape.transpose(y_eff);
    let rhs = tape.matmul(xw, y_eff_t);
    let a_t = tape.solve_spd(gram_reg, rhs)?;
    let a = tape.transpose(a_t);

    let bu_full = tape.matmul(params.b, gamma_leaf);
    let y_pred = match objective {
        TrainObjective::Recursive => {
            let mut current = tape.col(x_latent, 0);
            let mut columns = Vec::with_capacity(t);
            for step in 0..t {
                let advanced = tape.matmul(a, current);
                let forcing = tape.col(bu_full, step);
                current = tape.add(advanced, forcing);
                columns.push(current);
            }
            tape.concat_cols(&columns)
        }
        TrainObjective::SingleStep => {
            let one_step = tape.matmul(a, x_latent);
            tape.add(one_step, bu_full)
        }
    };

    let x_hat = forward_on_tape(tape, &model.decoder_spec, &params.dec, x_latent);
    let y_hat = forward_on_tape(tape, &model.decoder_spec, &params.dec, y_pred);

    let dx = tape.sub(x_leaf, x_hat);
    let dy = tape.sub(y_leaf, y_hat);
    let sx = tape.sum_squares(dx);
    let sy = tape.sum_squares(dy);
    let total = tape.add(sx, sy);
    // Mean over the sequence columns; the batch mean is taken by the caller.
    let loss = tape.scale(total, 1.0 / t as f64);
    Ok(SequenceLossNodes { loss, fitted_a: a })
}

fn normalized_matrices(
    model: &KoopmanModel,
    seq: &SnapshotSequence,
) -> crate::error::Result<(Matrix, Matrix, Matrix)> {
    let (x, y, gamma) = build_matrices(seq)?;
    Ok((
        model.normalization.normalize_matrix(&x),
        model.normalization.normalize_matrix(&y),
        gamma,
    ))
}

/// One least-squares fit over every transition in the training set, in the
/// model's latent coordinates (capped to bound the cost on large sets).
fn global_fit(
    model: &KoopmanModel,
    prepared: &[(Matrix, Matrix, Matrix)],
    config: &TrainingConfig,
) -> Option<Matrix> {
    const MAX_COLUMNS: usize = 8192;
    let per_seq = prepared.first()?.0.cols();
    let take = (MAX_COLUMNS / per_seq.max(1)).max(1).min(prepared.len());
    let encode = |m: &Matrix| crate::autodiff::forward(&model.encoder_spec, &model.encoder, m);

    let mut xs = Vec::with_capacity(take);
    let mut ys = Vec::with_capacity(take);
    let mut gammas = Vec::with_capacity(take);
    for (x, y, gamma) in prepared.iter().take(take) {
        xs.push(encode(x).ok()?);
        ys.push(encode(y).ok()?);
        gammas.push(gamma.clone());
    }
    let x_all = Matrix::hstack(&xs.iter().collect::<Vec<_>>());
    let y_all = Matrix::hstack(&ys.iter().collect::<Vec<_>>());
    let gamma_all = Matrix::hstack(&gammas.iter().collect::<Vec<_>>());
    let y_eff = if model.b.cols() == 0 {
        y_all
    } else {
        y_all.sub(&model.b.matmul(&gamma_all))
    };
    crate::numerics::tikhonov_lstsq(&x_all, &y_eff, config.tikhonov_eps).ok()
}

/// Total objective for one sequence (column-mean loss plus the L2 penalty),
/// as a plain number.
pub fn sequence_loss(
    model: &KoopmanModel,
    seq: &SnapshotSequence,
    l2_weight: f64,
    objective: TrainObjective,
) -> crate::error::Result<f64> {
    let (loss, _) = sequence_loss_with_gradients(model, seq, l2_weight, objective)?;
    Ok(loss)
}

/// Loss and its gradient with respect to every trainable tensor, in
/// [`flat_params`] order. Exercises differentiation through the fit.
pub fn sequence_loss_with_gradients(
    model: &KoopmanModel,
    seq: &SnapshotSequence,
    l2_weight: f64,
    objective: TrainObjective,
) -> crate::error::Result<(f64, Vec<Matrix>)> {
    let flat = flat_params(model);
    let mut tape = Tape::new();
    let params = register_flat(&mut tape, model, &flat);
    let (x, y, gamma) = normalized_matrices(model, seq)?;
    let nodes = sequence_loss_on_tape(&mut tape, model, &params, &x, &y, &gamma, objective)?;
    let weight_ids: Vec<NodeId> = params
        .enc
        .weights
        .iter()
        .chain(params.dec.weights.iter())
        .copied()
        .collect();
    let penalty = l2_penalty_on_tape(&mut tape, &weight_ids, l2_weight);
    let total = tape.add(nodes.loss, penalty);
    let value = tape.scalar(total);
    let grads_by_node = tape.backward(total)?;
    let grads = params
        .ids
        .iter()
        .zip(&flat)
        .map(|(&id, p)| grads_by_node.get_or_zeros(id, p.rows(), p.cols()))
        .collect();
    Ok((value, grads))
}

/// Train a fresh model on staggered snapshot sequences: seeded
/// initialization, normalization fitted on the dataset, then [`train`].
pub fn train_new(
    dataset: &[SnapshotSequence],
    config: &TrainingConfig,
    objective: TrainObjective,
) -> std::result::Result<TrainReport, TrainError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::Core(CoreError::InvalidArgument(
            "training dataset is empty".to_string(),
        )));
    }
    let mut model = KoopmanModel::init(dataset[0].state_dim(), config)?;
    model.normalization = Normalization::fit(dataset);
    train(&model, dataset, config, objective)
}

/// Train (or continue training) a model on staggered snapshot sequences.
///
/// The starting parameters come from `initial`; staged schedules chain
/// calls with adjusted configs (lower learning rate, longer sequences).
/// Deterministic for fixed inputs: batch order and every arithmetic step
/// flow from the config seed. The global input matrix is updated by the
/// optimizer alongside the network weights.
pub fn train(
    initial: &KoopmanModel,
    dataset: &[SnapshotSequence],
    config: &TrainingConfig,
    objective: TrainObjective,
) -> std::result::Result<TrainReport, TrainError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::Core(CoreError::InvalidArgument(
            "training dataset is empty".to_string(),
        )));
    }
    for (i, seq) in dataset.iter().enumerate() {
        seq.validate()?;
        if seq.transitions() != config.sequence_length {
            return Err(TrainError::Core(CoreError::DimensionMismatch(format!(
                "sequence {i} has {} transitions, config expects {}",
                seq.transitions(),
                config.sequence_length
            ))));
        }
        if seq.state_dim() != initial.state_dim() {
            return Err(TrainError::Core(CoreError::DimensionMismatch(format!(
                "sequence {i} has dimension {}, model expects {}",
                seq.state_dim(),
                initial.state_dim()
            ))));
        }
    }
    if initial.latent_dim != config.latent_dim {
        return Err(TrainError::Core(CoreError::DimensionMismatch(format!(
            "model latent dimension {} does not match config {}",
            initial.latent_dim, config.latent_dim
        ))));
    }

    let mut model = initial.clone();
    // The differentiable fit inside the loss uses the training ridge.
    model.tikhonov_eps = config.tikhonov_eps;
    model.fit_window = config.fit_window;

    let prepared: Vec<(Matrix, Matrix, Matrix)> = dataset
        .iter()
        .map(|seq| normalized_matrices(&model, seq))
        .collect::<crate::error::Result<_>>()?;

    let mut flat = flat_params(&model);
    let mut adam = AdamState::new(
        &flat,
        AdamConfig {
            lr: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = SplitMix64::new(config.seed).fork("batch-order");

    let mut history: Vec<f64> = Vec::with_capacity(config.epochs);
    let mut last_good = flat.clone();
    let mut last_a: Option<Matrix> = None;

    let finish = |model: &mut KoopmanModel, flat: &[Matrix], history: Vec<f64>, last_a: Option<Matrix>| {
        write_flat_params(model, flat);
        // Cache a dynamics matrix fit over every training transition at
        // once; the richly excited stack gives a stable operator that
        // anchors data-poor directions of later windowed refits. Falls back
        // to the last per-sequence fit if the global fit fails.
        model.last_fit_a = global_fit(model, &prepared, config).or(last_a);
        // The delivered model refits with the inference ridge strength.
        model.tikhonov_eps = config.refit_eps;
        TrainReport {
            model: model.clone(),
            history,
        }
    };

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;

        for batch in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let params = register_flat(&mut tape, &model, &flat);

            let mut batch_total: Option<NodeId> = None;
            let mut batch_a: Option<NodeId> = None;
            for &seq_idx in batch {
                let (x, y, gamma) = &prepared[seq_idx];
                let nodes =
                    match sequence_loss_on_tape(&mut tape, &model, &params, x, y, gamma, objective)
                    {
                        Ok(n) => n,
                        // A non-SPD Gram matrix means the encoder collapsed;
                        // treat it like a NaN loss and hand back the last
                        // good parameters.
                        Err(CoreError::Numerical(_)) => {
                            return Err(TrainError::NanAbort {
                                epoch,
                                last_good: Box::new(finish(&mut model, &last_good, history, last_a)),
                            });
                        }
                        Err(other) => return Err(other.into()),
                    };
                batch_total = Some(match batch_total {
                    Some(acc) => tape.add(acc, nodes.loss),
                    None => nodes.loss,
                });
                batch_a = Some(nodes.fitted_a);
            }
            let total = batch_total.expect("batches are non-empty");
            let mean = tape.scale(total, 1.0 / batch.len() as f64);
            let weight_ids: Vec<NodeId> = params
                .enc
                .weights
                .iter()
                .chain(params.dec.weights.iter())
                .copied()
                .collect();
            let penalty = l2_penalty_on_tape(&mut tape, &weight_ids, config.l2_weight);
            let objective_node = tape.add(mean, penalty);

            let batch_loss = tape.scalar(objective_node);
            if !batch_loss.is_finite() {
                return Err(TrainError::NanAbort {
                    epoch,
                    last_good: Box::new(finish(&mut model, &last_good, history, last_a)),
                });
            }
            epoch_loss += batch_loss * batch.len() as f64;

            if let Some(a_node) = batch_a {
                last_a = Some(tape.value(a_node).clone());
            }

            let grads_by_node = tape.backward(objective_node)?;
            let grads: Vec<Matrix> = params
                .ids
                .iter()
                .zip(&flat)
                .map(|(&id, p)| grads_by_node.get_or_zeros(id, p.rows(), p.cols()))
                .collect();
            if let Err(err) = adam.step(&mut flat, &grads) {
                let _ = err;
                return Err(TrainError::NanAbort {
                    epoch,
                    last_good: Box::new(finish(&mut model, &last_good, history, last_a)),
                });
            }
        }

        history.push(epoch_loss / dataset.len() as f64);
        last_good = flat.clone();
    }

    Ok(finish(&mut model, &flat, history, last_a))
}
