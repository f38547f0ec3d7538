use crate::error::{CoreError, Result};
use crate::numerics::{CholeskyFactor, Matrix};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// Matrix plus a column vector broadcast across all columns.
    AddColBroadcast(NodeId, NodeId),
    Relu(NodeId),
    Transpose(NodeId),
    SliceCols(NodeId, usize, usize),
    ConcatCols(Vec<NodeId>),
    /// S = M^-1 R for symmetric positive definite M. The factor computed in
    /// the forward pass is reused by the backward rule.
    SolveSpd {
        matrix: NodeId,
        rhs: NodeId,
        factor: Box<CholeskyFactor>,
    },
    /// Sum of squared entries, yielding a 1x1 node.
    SumSquares(NodeId),
}

struct Node {
    op: Op,
    value: Matrix,
}

/// Append-only record of tensor primitives.
///
/// Nodes are stored in topological order by construction: an operation can
/// only reference ids that already exist. One backward pass is permitted per
/// tape; gradients of shared subexpressions accumulate additively.
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads[id.0].as_ref()
    }

    /// Gradient for a node, zero-filled if the loss did not depend on it.
    pub fn get_or_zeros(&self, id: NodeId, rows: usize, cols: usize) -> Matrix {
        match self.grads[id.0] {
            Some(ref g) => g.clone(),
            None => Matrix::zeros(rows, cols),
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Insert a leaf holding a constant or a trainable parameter.
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).add(self.value(b));
        self.push(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).sub(self.value(b));
        self.push(Op::Sub(a, b), value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), value)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.value(a).scale(factor);
        self.push(Op::Scale(a, factor), value)
    }

    /// Add a column vector to every column of a matrix.
    pub fn add_col_broadcast(&mut self, matrix: NodeId, column: NodeId) -> NodeId {
        let m = self.value(matrix);
        let c = self.value(column);
        assert_eq!(c.cols(), 1, "broadcast argument must be a column vector");
        assert_eq!(c.rows(), m.rows(), "broadcast row mismatch");
        let value = Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] + c[(i, 0)]);
        self.push(Op::AddColBroadcast(matrix, column), value)
    }

    /// Rectified linear unit. The subgradient at exactly zero is zero.
    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let value = Matrix::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)].max(0.0));
        self.push(Op::Relu(a), value)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), value)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let value = self.value(a).slice_cols(start, len);
        self.push(Op::SliceCols(a, start, len), value)
    }

    /// Single column of a matrix as an n-by-1 node.
    pub fn col(&mut self, a: NodeId, j: usize) -> NodeId {
        self.slice_cols(a, j, 1)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let values: Vec<&Matrix> = parts.iter().map(|&id| self.value(id)).collect();
        let value = Matrix::hstack(&values);
        self.push(Op::ConcatCols(parts.to_vec()), value)
    }

    /// Differentiable solve of M S = R with M symmetric positive definite.
    ///
    /// M is treated as its symmetric part, which makes the symmetrized
    /// backward rule exact for arbitrary elementwise perturbations.
    pub fn solve_spd(&mut self, matrix: NodeId, rhs: NodeId) -> Result<NodeId> {
        let m = self.value(matrix);
        let symmetric = m.add(&m.transpose()).scale(0.5);
        let factor = CholeskyFactor::new(&symmetric)?;
        let value = factor.solve(self.value(rhs));
        Ok(self.push(
            Op::SolveSpd {
                matrix,
                rhs,
                factor: Box::new(factor),
            },
            value,
        ))
    }

    /// Sum of squared entries as a 1x1 node.
    pub fn sum_squares(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let total: f64 = v.data().iter().map(|x| x * x).sum();
        self.push(Op::SumSquares(a), Matrix::from_vec(1, 1, vec![total]))
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!((v.rows(), v.cols()), (1, 1), "node is not scalar");
        v[(0, 0)]
    }

    /// Reverse-mode sweep from a scalar loss node.
    ///
    /// Every node reachable from the loss receives a gradient; a second call
    /// on the same tape is an error.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        if self.backward_done {
            return Err(CoreError::InvalidArgument(
                "backward already ran on this tape".to_string(),
            ));
        }
        let loss_value = self.value(loss);
        if (loss_value.rows(), loss_value.cols()) != (1, 1) {
            return Err(CoreError::InvalidArgument(format!(
                "backward requires a scalar loss node, got {}x{}",
                loss_value.rows(),
                loss_value.cols()
            )));
        }
        self.backward_done = true;

        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]));

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = grads[idx].clone() else {
                continue;
            };
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, upstream.clone());
                    accumulate(&mut grads, *b, upstream);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, upstream.clone());
                    accumulate(&mut grads, *b, upstream.scale(-1.0));
                }
                Op::MatMul(a, b) => {
                    let ga = upstream.matmul(&self.nodes[b.0].value.transpose());
                    let gb = self.nodes[a.0].value.transpose().matmul(&upstream);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, factor) => {
                    accumulate(&mut grads, *a, upstream.scale(*factor));
                }
                Op::AddColBroadcast(matrix, column) => {
                    let mut col_grad = Matrix::zeros(upstream.rows(), 1);
                    for i in 0..upstream.rows() {
                        for j in 0..upstream.cols() {
                            col_grad[(i, 0)] += upstream[(i, j)];
                        }
                    }
                    accumulate(&mut grads, *matrix, upstream);
                    accumulate(&mut grads, *column, col_grad);
                }
                Op::Relu(a) => {
                    let input = &self.nodes[a.0].value;
                    let ga = Matrix::from_fn(input.rows(), input.cols(), |i, j| {
                        if input[(i, j)] > 0.0 {
                            upstream[(i, j)]
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads, *a, upstream.transpose());
                }
                Op::SliceCols(a, start, len) => {
                    let src = &self.nodes[a.0].value;
                    let mut ga = Matrix::zeros(src.rows(), src.cols());
                    for i in 0..upstream.rows() {
                        for j in 0..*len {
                            ga[(i, start + j)] = upstream[(i, j)];
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let parts = parts.clone();
                    let mut offset = 0;
                    for part in parts {
                        let width = self.nodes[part.0].value.cols();
                        let gp = upstream.slice_cols(offset, width);
                        offset += width;
                        accumulate(&mut grads, part, gp);
                    }
                }
                Op::SolveSpd {
                    matrix,
                    rhs,
                    factor,
                } => {
                    // S = M^-1 R: grad_R = M^-1 G, and
                    // grad_M = -(M^-1 G) S^T, symmetrized because M is
                    // reached only through symmetric constructions.
                    let solution = &self.nodes[idx].value;
                    let grad_rhs = factor.solve(&upstream);
                    let raw = grad_rhs.matmul(&solution.transpose()).scale(-1.0);
                    let grad_matrix = raw.add(&raw.transpose()).scale(0.5);
                    accumulate(&mut grads, *matrix, grad_matrix);
                    accumulate(&mut grads, *rhs, grad_rhs);
                }
                Op::SumSquares(a) => {
                    let g = upstream[(0, 0)];
                    let ga = self.nodes[a.0].value.scale(2.0 * g);
                    accumulate(&mut grads, *a, ga);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], id: NodeId, contribution: Matrix) {
    match &mut grads[id.0] {
        Some(existing) => *existing = existing.add(&contribution),
        slot @ None => *slot = Some(contribution),
    }
}
