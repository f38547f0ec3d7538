//! Gradient checks for every tape primitive: reverse-mode derivatives must
//! match central finite differences over random shapes and values.

use koopman_core::autodiff::{NodeId, Tape};
use koopman_core::numerics::Matrix;
use proptest::prelude::*;

const FD_STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-5;

fn assert_close(ad: f64, fd: f64, what: &str) {
    let denom = ad.abs().max(fd.abs()).max(1e-4);
    assert!(
        (ad - fd).abs() / denom < REL_TOL,
        "{what}: reverse-mode {ad} vs finite-difference {fd}"
    );
}

/// Check d(scalar_fn(inputs)) / d(inputs) for every entry of every input.
fn check_gradients(inputs: &[Matrix], scalar_fn: impl Fn(&mut Tape, &[NodeId]) -> NodeId) {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|m| tape.leaf(m.clone())).collect();
    let loss = scalar_fn(&mut tape, &ids);
    let grads = tape.backward(loss).expect("scalar loss");

    for (which, input) in inputs.iter().enumerate() {
        let grad = grads.get_or_zeros(ids[which], input.rows(), input.cols());
        for k in 0..input.data().len() {
            let eval = |delta: f64| -> f64 {
                let mut perturbed: Vec<Matrix> = inputs.to_vec();
                perturbed[which].data_mut()[k] += delta;
                let mut t = Tape::new();
                let ids: Vec<NodeId> = perturbed.iter().map(|m| t.leaf(m.clone())).collect();
                let node = scalar_fn(&mut t, &ids);
                t.scalar(node)
            };
            let fd = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
            assert_close(grad.data()[k], fd, &format!("input {which} entry {k}"));
        }
    }
}

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |data| Matrix::from_vec(rows, cols, data))
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..4, 1usize..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn add_sub_scale_gradients((r, c) in dims(), seed in any::<u64>()) {
        let mut rng = koopman_core::rng::SplitMix64::new(seed);
        let a = Matrix::from_fn(r, c, |_, _| rng.uniform(-2.0, 2.0));
        let b = Matrix::from_fn(r, c, |_, _| rng.uniform(-2.0, 2.0));
        check_gradients(&[a.clone(), b.clone()], |t, ids| {
            let s = t.add(ids[0], ids[1]);
            let d = t.sub(s, ids[1]);
            let sc = t.scale(d, -1.7);
            t.sum_squares(sc)
        });
    }

    #[test]
    fn matmul_gradients((m, k) in dims(), n in 1usize..4, seed in any::<u64>()) {
        let mut rng = koopman_core::rng::SplitMix64::new(seed);
        let a = Matrix::from_fn(m, k, |_, _| rng.uniform(-2.0, 2.0));
        let b = Matrix::from_fn(k, n, |_, _| rng.uniform(-2.0, 2.0));
        check_gradients(&[a, b], |t, ids| {
            let p = t.matmul(ids[0], ids[1]);
            t.sum_squares(p)
        });
    }

    #[test]
    fn broadcast_and_transpose_gradients((r, c) in dims(), seed in any::<u64>()) {
        let mut rng = koopman_core::rng::SplitMix64::new(seed);
        let m = Matrix::from_fn(r, c, |_, _| rng.uniform(-2.0, 2.0));
        let col = Matrix::from_fn(r, 1, |_, _| rng.uniform(-2.0, 2.0));
        check_gradients(&[m, col], |t, ids| {
            let b = t.add_col_broadcast(ids[0], ids[1]);
            let tr = t.transpose(b);
            t.sum_squares(tr)
        });
    }

    #[test]
    fn relu_gradients((r, c) in dims(), seed in any::<u64>()) {
        let mut rng = koopman_core::rng::SplitMix64::new(seed);
        // Keep entries away from the kink so finite differences are valid.
        let m = Matrix::from_fn(r, c, |_, _| {
            let v = rng.uniform(-2.0, 2.0);
            if v.abs() < 0.05 { v + 0.1 } else { v }
        });
        check_gradients(&[m], |t, ids| {
            let r = t.relu(ids[0]);
            t.sum_squares(r)
        });
    }

    #[test]
    fn slice_concat_gradients(c in 2usize..5, seed in any::<u64>()) {
        let mut rng = koopman_core::rng::SplitMix64::new(seed);
        let m = Matrix::from_fn(3, c, |_, _| rng.uniform(-2.0, 2.0));
        check_gradients(&[m], |t, ids| {
            let left = t.slice_cols(ids[0], 0, 1);
            let rest = t.slice_cols(ids[0], 1, c - 1);
            let swapped = t.concat_cols(&[rest, left]);
            t.sum_squares(swapped)
        });
    }

    #[test]
    fn solve_spd_gradients(n in 1usize..4, rhs_cols in 1usize..3, seed in any::<u64>()) {
        let mut rng = koopman_core::rng::SplitMix64::new(seed);
        let g = Matrix::from_fn(n, n, |_, _| rng.uniform(-1.0, 1.0));
        // SPD with a comfortable margin so FD perturbations stay SPD.
        let spd = g.matmul(&g.transpose()).add(&Matrix::identity(n).scale(1.5));
        let rhs = Matrix::from_fn(n, rhs_cols, |_, _| rng.uniform(-2.0, 2.0));
        check_gradients(&[spd, rhs], |t, ids| {
            let s = t.solve_spd(ids[0], ids[1]).expect("SPD by construction");
            t.sum_squares(s)
        });
    }
}

#[test]
fn small_network_gradients_match_finite_differences() {
    // Full two-layer ReLU network; every weight and bias checked.
    use koopman_core::autodiff::{forward_on_tape, register_params, DenseNetSpec};
    let spec = DenseNetSpec::new(vec![3, 5, 2], 2024).unwrap();
    let params = spec.init_params();
    let input = Matrix::from_fn(3, 4, |i, j| ((i * 7 + j * 3) as f64 * 0.13).sin());

    let loss_of = |params: &koopman_core::autodiff::NetParams| -> f64 {
        let mut tape = Tape::new();
        let ids = register_params(&mut tape, params);
        let x = tape.leaf(input.clone());
        let out = forward_on_tape(&mut tape, &spec, &ids, x);
        let loss = tape.sum_squares(out);
        tape.scalar(loss)
    };

    let mut tape = Tape::new();
    let ids = register_params(&mut tape, &params);
    let x = tape.leaf(input.clone());
    let out = forward_on_tape(&mut tape, &spec, &ids, x);
    let loss = tape.sum_squares(out);
    let grads = tape.backward(loss).unwrap();

    let all_ids: Vec<_> = ids.weights.iter().chain(ids.biases.iter()).copied().collect();
    for (slot, id) in all_ids.iter().enumerate() {
        let (layer, is_bias) = if slot < 2 { (slot, false) } else { (slot - 2, true) };
        let tensor = if is_bias {
            params.biases[layer].clone()
        } else {
            params.weights[layer].clone()
        };
        let grad = grads.get_or_zeros(*id, tensor.rows(), tensor.cols());
        for k in 0..tensor.data().len() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            if is_bias {
                plus.biases[layer].data_mut()[k] += FD_STEP;
                minus.biases[layer].data_mut()[k] -= FD_STEP;
            } else {
                plus.weights[layer].data_mut()[k] += FD_STEP;
                minus.weights[layer].data_mut()[k] -= FD_STEP;
            }
            let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * FD_STEP);
            assert_close(grad.data()[k], fd, &format!("slot {slot} entry {k}"));
        }
    }
}
