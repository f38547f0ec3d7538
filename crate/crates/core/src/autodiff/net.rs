use serde::{Deserialize, Serialize};

use crate::autodiff::tape::{NodeId, Tape};
use crate::error::{CoreError, Result};
use crate::numerics::Matrix;
use crate::rng::SplitMix64;

/// Architecture of a dense feed-forward network: ReLU on hidden layers,
/// identity on the output layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseNetSpec {
    /// Input dimension first, output dimension last. At least two entries.
    pub layer_sizes: Vec<usize>,
    pub init_seed: u64,
}

impl DenseNetSpec {
    pub fn new(layer_sizes: Vec<usize>, init_seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(CoreError::InvalidArgument(
                "a network needs at least an input and an output layer".to_string(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(CoreError::InvalidArgument(
                "layer sizes must be at least 1".to_string(),
            ));
        }
        Ok(Self {
            layer_sizes,
            init_seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated: non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// He-uniform initialization scaled by fan-in; biases start at zero.
    /// Identical seeds produce bit-identical parameters.
    pub fn init_params(&self) -> NetParams {
        let mut rng = SplitMix64::new(self.init_seed);
        let mut weights = Vec::with_capacity(self.num_layers());
        let mut biases = Vec::with_capacity(self.num_layers());
        for l in 0..self.num_layers() {
            let fan_in = self.layer_sizes[l];
            let fan_out = self.layer_sizes[l + 1];
            let limit = (6.0 / fan_in as f64).sqrt();
            weights.push(Matrix::from_fn(fan_out, fan_in, |_, _| {
                rng.uniform(-limit, limit)
            }));
            biases.push(Matrix::zeros(fan_out, 1));
        }
        NetParams { weights, biases }
    }
}

/// Per-layer weight matrices and bias columns.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Matrix>,
}

impl NetParams {
    pub fn matches_spec(&self, spec: &DenseNetSpec) -> bool {
        self.weights.len() == spec.num_layers()
            && self.biases.len() == spec.num_layers()
            && (0..spec.num_layers()).all(|l| {
                self.weights[l].rows() == spec.layer_sizes[l + 1]
                    && self.weights[l].cols() == spec.layer_sizes[l]
                    && self.biases[l].rows() == spec.layer_sizes[l + 1]
                    && self.biases[l].cols() == 1
            })
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite) && self.biases.iter().all(Matrix::is_finite)
    }
}

/// Pure forward pass over a batch whose columns are samples.
pub fn forward(spec: &DenseNetSpec, params: &NetParams, batch: &Matrix) -> Result<Matrix> {
    if batch.rows() != spec.input_dim() {
        return Err(CoreError::DimensionMismatch(format!(
            "input rows {} do not match network input dim {}",
            batch.rows(),
            spec.input_dim()
        )));
    }
    if !params.matches_spec(spec) {
        return Err(CoreError::DimensionMismatch(
            "parameter shapes do not match the network spec".to_string(),
        ));
    }
    let mut activation = batch.clone();
    for l in 0..spec.num_layers() {
        let z = params.weights[l].matmul(&activation);
        let mut z = Matrix::from_fn(z.rows(), z.cols(), |i, j| z[(i, j)] + params.biases[l][(i, 0)]);
        if l + 1 < spec.num_layers() {
            for v in z.data_mut() {
                *v = v.max(0.0);
            }
        }
        activation = z;
    }
    Ok(activation)
}

/// Ids of the parameter leaves registered on a tape, in layer order.
#[derive(Debug, Clone)]
pub struct NetParamIds {
    pub weights: Vec<NodeId>,
    pub biases: Vec<NodeId>,
}

/// Insert all parameters of a network as tape leaves.
pub fn register_params(tape: &mut Tape, params: &NetParams) -> NetParamIds {
    NetParamIds {
        weights: params.weights.iter().map(|w| tape.leaf(w.clone())).collect(),
        biases: params.biases.iter().map(|b| tape.leaf(b.clone())).collect(),
    }
}

/// Forward pass recorded on the tape, for training.
pub fn forward_on_tape(
    tape: &mut Tape,
    spec: &DenseNetSpec,
    ids: &NetParamIds,
    input: NodeId,
) -> NodeId {
    assert_eq!(
        tape.value(input).rows(),
        spec.input_dim(),
        "input rows do not match network input dim"
    );
    let mut activation = input;
    for l in 0..spec.num_layers() {
        let z = tape.matmul(ids.weights[l], activation);
        let z = tape.add_col_broadcast(z, ids.biases[l]);
        activation = if l + 1 < spec.num_layers() {
            tape.relu(z)
        } else {
            z
        };
    }
    activation
}

/// L2 penalty on weight matrices only (biases are exempt), recorded on the
/// tape as `weight * sum of squared entries`.
pub fn l2_penalty_on_tape(tape: &mut Tape, weight_ids: &[NodeId], weight: f64) -> NodeId {
    assert!(weight >= 0.0, "l2 weight must be nonnegative");
    let mut total = tape.leaf(Matrix::zeros(1, 1));
    for &w in weight_ids {
        let sq = tape.sum_squares(w);
        total = tape.add(total, sq);
    }
    tape.scale(total, weight)
}

/// Plain value of the L2 penalty, for reporting.
pub fn l2_penalty_value(params: &NetParams, weight: f64) -> f64 {
    weight
        * params
            .weights
            .iter()
            .map(|w| w.data().iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
}
