use crate::numerics::Matrix;

/// Matrix exponential exp(t M) by scaling and squaring with a Taylor core.
///
/// The argument is scaled by a power of two until its Frobenius norm is at
/// most 1/2, expanded in a truncated Taylor series, then squared back up.
/// Accuracy is well below 1e-10 relative for ||t M|| up to 10.
pub fn matrix_exp(m: &Matrix, t: f64) -> Matrix {
    assert_eq!(m.rows(), m.cols(), "matrix_exp requires a square matrix");
    let n = m.rows();
    let scaled = m.scale(t);
    let norm = scaled.frobenius_norm();

    let mut squarings = 0u32;
    let mut shrink = 1.0;
    while norm * shrink > 0.5 {
        squarings += 1;
        shrink *= 0.5;
    }
    let base = scaled.scale(shrink);

    // Taylor series: each term is base^k / k!; 24 terms at norm <= 1/2 leaves
    // a remainder far below machine epsilon.
    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=24 {
        term = term.matmul(&base).scale(1.0 / k as f64);
        result = result.add(&term);
    }

    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}
