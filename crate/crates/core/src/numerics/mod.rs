//! Dense linear algebra kernel shared by every other module: SVD,
//! pseudoinverse, least squares, Cholesky solves, matrix exponential, and
//! norms. All operations are pure functions of their inputs.

mod expm;
mod matrix;
mod solve;
pub mod svd;

pub use expm::matrix_exp;
pub use matrix::{l1_norm, l2_norm, Matrix};
pub use solve::{solve_spd, tikhonov_lstsq, CholeskyFactor};
pub use svd::{lstsq_min_norm, pinv, svd, SvdResult, DEFAULT_REL_TOL};
