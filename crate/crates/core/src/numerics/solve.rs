use crate::error::{CoreError, Result};
use crate::numerics::Matrix;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: Matrix,
}

impl CholeskyFactor {
    /// Factor M = L L^T. Fails if M is not numerically positive definite.
    pub fn new(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(CoreError::DimensionMismatch(format!(
                "cholesky requires a square matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let mut lower = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = m[(i, j)];
                for k in 0..j {
                    sum -= lower[(i, k)] * lower[(j, k)];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(CoreError::Numerical(format!(
                            "cholesky pivot {i} is non-positive ({sum:e}); matrix is not SPD"
                        )));
                    }
                    lower[(i, j)] = sum.sqrt();
                } else {
                    lower[(i, j)] = sum / lower[(j, j)];
                }
            }
        }
        Ok(Self { lower })
    }

    /// Solve M x = b for one right-hand side.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lower.rows();
        assert_eq!(b.len(), n, "cholesky solve length mismatch");
        // Forward substitution L y = b.
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= self.lower[(i, k)] * y[k];
            }
            y[i] = sum / self.lower[(i, i)];
        }
        // Back substitution L^T x = y.
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= self.lower[(k, i)] * x[k];
            }
            x[i] = sum / self.lower[(i, i)];
        }
        x
    }

    /// Solve M X = B column by column.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.rows(), self.lower.rows(), "cholesky solve shape mismatch");
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.column(j));
            out.set_column(j, &col);
        }
        out
    }
}

/// Solve M X = B for symmetric positive definite M.
pub fn solve_spd(m: &Matrix, b: &Matrix) -> Result<Matrix> {
    Ok(CholeskyFactor::new(m)?.solve(b))
}

/// Ridge-regularized least squares A = Y X^T (X X^T + eps I)^-1.
///
/// Unlike the pseudoinverse route this map is smooth in X and Y, which is
/// what lets gradients flow through the fit during training.
pub fn tikhonov_lstsq(x: &Matrix, y: &Matrix, eps: f64) -> Result<Matrix> {
    if eps <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "tikhonov eps must be positive".to_string(),
        ));
    }
    if x.cols() != y.cols() {
        return Err(CoreError::DimensionMismatch(format!(
            "tikhonov: X has {} columns, Y has {}",
            x.cols(),
            y.cols()
        )));
    }
    let xt = x.transpose();
    let mut gram = x.matmul(&xt);
    for i in 0..gram.rows() {
        gram[(i, i)] += eps;
    }
    // A^T = (X X^T + eps I)^-1 X Y^T, so A = Y X^T (X X^T + eps I)^-1.
    let rhs = x.matmul(&y.transpose());
    Ok(solve_spd(&gram, &rhs)?.transpose())
}
