use crate::error::{CoreError, Result};
use crate::numerics::Matrix;

/// Singular value decomposition M = U * diag(S) * Vt.
///
/// Thin form: for an m-by-n input, U is m-by-k, S has k = min(m, n) entries
/// sorted descending, and Vt is k-by-n. Columns of U and rows of Vt are
/// orthonormal.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
    /// Number of singular values above `rank_tol * s[0]`.
    pub rank: usize,
}

/// Relative truncation tolerance used for rank counting and pseudoinversion.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 64;
const JACOBI_TOL: f64 = 1e-14;

/// One-sided Jacobi SVD.
///
/// Column pairs of the working matrix are repeatedly rotated until all pairs
/// are numerically orthogonal; singular values are the resulting column
/// norms. Deterministic for a fixed input. Wide inputs are transposed first.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(CoreError::InvalidArgument(
            "svd requires finite entries".to_string(),
        ));
    }
    if m.rows() < m.cols() {
        let flipped = svd(&m.transpose())?;
        let rank = flipped.rank;
        return Ok(SvdResult {
            u: flipped.vt.transpose(),
            s: flipped.s,
            vt: flipped.u.transpose(),
            rank,
        });
    }

    let rows = m.rows();
    let n = m.cols();
    let mut work = m.clone();
    let mut v = Matrix::identity(n);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off_diagonal = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..rows {
                    let wp = work[(i, p)];
                    let wq = work[(i, q)];
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() + f64::MIN_POSITIVE {
                    continue;
                }
                off_diagonal = true;

                // Jacobi rotation that zeroes the (p, q) inner product.
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;

                for i in 0..rows {
                    let wp = work[(i, p)];
                    let wq = work[(i, q)];
                    work[(i, p)] = c * wp - s * wq;
                    work[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !off_diagonal {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CoreError::Numerical(format!(
            "svd did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    // Column norms are the singular values; normalized columns form U.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n)
        .map(|j| (0..rows).map(|i| work[(i, j)] * work[(i, j)]).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).expect("finite norms"));

    let mut u = Matrix::zeros(rows, n);
    let mut s = Vec::with_capacity(n);
    let mut vt = Matrix::zeros(n, n);
    for (slot, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        s.push(sigma);
        for i in 0..n {
            vt[(slot, i)] = v[(i, j)];
        }
        if sigma > 0.0 {
            for i in 0..rows {
                u[(i, slot)] = work[(i, j)] / sigma;
            }
        }
    }

    // Zero singular values leave U columns undefined; complete the basis
    // deterministically from canonical vectors.
    for slot in 0..n {
        if s[slot] > 0.0 {
            continue;
        }
        'candidates: for k in 0..rows {
            let mut candidate = vec![0.0; rows];
            candidate[k] = 1.0;
            // Orthogonalize against every column already filled in.
            for prev in 0..n {
                if prev != slot && (s[prev] > 0.0 || prev < slot) {
                    let dot: f64 = (0..rows).map(|i| candidate[i] * u[(i, prev)]).sum();
                    for i in 0..rows {
                        candidate[i] -= dot * u[(i, prev)];
                    }
                }
            }
            let norm = candidate.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                for i in 0..rows {
                    u[(i, slot)] = candidate[i] / norm;
                }
                break 'candidates;
            }
        }
    }

    let s_max = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&x| x > DEFAULT_REL_TOL * s_max).count();

    Ok(SvdResult { u, s, vt, rank })
}

/// Moore-Penrose pseudoinverse via truncated SVD.
///
/// Singular values below `rel_tol * s[0]` are treated as zero.
pub fn pinv(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    if rel_tol <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "pinv rel_tol must be positive".to_string(),
        ));
    }
    let decomposition = svd(m)?;
    let s_max = decomposition.s.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * s_max;
    let k = decomposition.s.len();
    let inv = Matrix::from_fn(k, k, |i, j| {
        if i == j && decomposition.s[i] > cutoff {
            1.0 / decomposition.s[i]
        } else {
            0.0
        }
    });
    // pinv = V * S^+ * U^T
    Ok(decomposition
        .vt
        .transpose()
        .matmul(&inv)
        .matmul(&decomposition.u.transpose()))
}

/// Minimum-Frobenius-norm least-squares fit A = Y X^+ of Y ~ A X.
pub fn lstsq_min_norm(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    if x.cols() != y.cols() {
        return Err(CoreError::DimensionMismatch(format!(
            "lstsq: X has {} columns, Y has {}",
            x.cols(),
            y.cols()
        )));
    }
    Ok(y.matmul(&pinv(x, DEFAULT_REL_TOL)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(d: &SvdResult) -> Matrix {
        d.u.matmul(&Matrix::diag(&d.s)).matmul(&d.vt)
    }

    fn assert_orthonormal_columns(m: &Matrix, tol: f64) {
        let gram = m.transpose().matmul(m);
        let err = gram.sub(&Matrix::identity(m.cols())).frobenius_norm();
        assert!(err < tol, "columns not orthonormal: {err}");
    }

    /// Penrose-condition oracle: the four defining identities of the
    /// pseudoinverse, each checked to a relative tolerance.
    fn assert_penrose(m: &Matrix, p: &Matrix, tol: f64) {
        let scale = m.frobenius_norm().max(1.0);
        let mpm = m.matmul(p).matmul(m);
        assert!(mpm.sub(m).frobenius_norm() < tol * scale, "MPM != M");
        let pscale = p.frobenius_norm().max(1.0);
        let pmp = p.matmul(m).matmul(p);
        assert!(pmp.sub(p).frobenius_norm() < tol * pscale, "PMP != P");
        let mp = m.matmul(p);
        assert!(mp.sub(&mp.transpose()).frobenius_norm() < tol * scale.max(1.0), "(MP)^T != MP");
        let pm = p.matmul(m);
        assert!(pm.sub(&pm.transpose()).frobenius_norm() < tol * scale.max(1.0), "(PM)^T != PM");
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut crate::rng::SplitMix64) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.uniform(-2.0, 2.0))
    }

    #[test]
    fn identity_singular_values() {
        let d = svd(&Matrix::identity(2)).unwrap();
        assert!((d.s[0] - 1.0).abs() < 1e-12);
        assert!((d.s[1] - 1.0).abs() < 1e-12);
        assert_eq!(d.rank, 2);
    }

    #[test]
    fn diagonal_with_zero() {
        let d = svd(&Matrix::diag(&[3.0, 0.0])).unwrap();
        assert!((d.s[0] - 3.0).abs() < 1e-12);
        assert!(d.s[1].abs() < 1e-12);
        assert_eq!(d.rank, 1);
        // Reconstruction holds even with the zero singular value.
        assert!(reconstruct(&d).sub(&Matrix::diag(&[3.0, 0.0])).frobenius_norm() < 1e-10);
        assert_orthonormal_columns(&d.u, 1e-10);
    }

    #[test]
    fn random_rectangular_satisfies_contract() {
        let mut rng = crate::rng::SplitMix64::new(11);
        for &(r, c) in &[(4usize, 6usize), (6, 4), (5, 5), (3, 8)] {
            let m = random_matrix(r, c, &mut rng);
            let d = svd(&m).unwrap();
            for w in d.s.windows(2) {
                assert!(w[0] >= w[1]);
            }
            assert!(d.s.iter().all(|&x| x >= 0.0));
            assert_orthonormal_columns(&d.u, 1e-10);
            assert_orthonormal_columns(&d.vt.transpose(), 1e-10);
            let err = reconstruct(&d).sub(&m).frobenius_norm();
            assert!(err <= 1e-8 * m.frobenius_norm().max(1.0));

            let p = pinv(&m, 1e-12).unwrap();
            assert_penrose(&m, &p, 1e-8);
        }
    }

    #[test]
    fn pinv_identity_and_diagonal() {
        let p = pinv(&Matrix::identity(3), 1e-12).unwrap();
        assert!(p.sub(&Matrix::identity(3)).frobenius_norm() < 1e-12);

        let p = pinv(&Matrix::diag(&[2.0, 0.0]), 1e-12).unwrap();
        assert!(p.sub(&Matrix::diag(&[0.5, 0.0])).frobenius_norm() < 1e-12);
    }

    #[test]
    fn pinv_rank_deficient_penrose() {
        let mut rng = crate::rng::SplitMix64::new(5);
        // Rank-2 4x5 matrix built from an outer product pair.
        let a = random_matrix(4, 2, &mut rng);
        let b = random_matrix(2, 5, &mut rng);
        let m = a.matmul(&b);
        let p = pinv(&m, 1e-10).unwrap();
        assert_penrose(&m, &p, 1e-8);
    }

    #[test]
    fn lstsq_identity_regressor() {
        let y = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let a = lstsq_min_norm(&Matrix::identity(2), &y).unwrap();
        assert!(a.sub(&y).frobenius_norm() < 1e-12);
    }

    #[test]
    fn lstsq_recovers_dynamics_matrix() {
        // Snapshots of x_{t+1} = A0 x_t for a known contraction A0.
        let mut rng = crate::rng::SplitMix64::new(21);
        let raw = random_matrix(3, 3, &mut rng);
        let a0 = raw.scale(0.9 / raw.frobenius_norm().max(1.0));
        let t = 12;
        let mut state = vec![1.0, -0.7, 0.4];
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..t {
            xs.push(state.clone());
            state = a0.matvec(&state);
            ys.push(state.clone());
        }
        let x = Matrix::from_columns(&xs);
        let y = Matrix::from_columns(&ys);
        let a = lstsq_min_norm(&x, &y).unwrap();
        assert!(a.sub(&a0).frobenius_norm() < 1e-8, "residual {}", a.sub(&a0).frobenius_norm());
    }

    #[test]
    fn lstsq_rank_deficient_is_min_norm() {
        // Duplicate columns make X rank deficient; the returned A must have
        // no component outside the row space of X (A (I - X X^+) = 0) and
        // must match the explicit SVD construction.
        let x = Matrix::from_columns(&[
            vec![1.0, 0.0, 2.0],
            vec![1.0, 0.0, 2.0],
            vec![0.0, 1.0, -1.0],
        ]);
        let y = Matrix::from_columns(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![3.0, -1.0]]);
        let a = lstsq_min_norm(&x, &y).unwrap();

        let explicit = y.matmul(&pinv(&x, 1e-12).unwrap());
        assert!(a.sub(&explicit).frobenius_norm() < 1e-12);

        let projector = Matrix::identity(3).sub(&x.matmul(&pinv(&x, 1e-12).unwrap()));
        assert!(a.matmul(&projector).frobenius_norm() < 1e-8);

        // Any perturbation with the same residual has larger norm.
        let mut rng = crate::rng::SplitMix64::new(77);
        for _ in 0..20 {
            let z = random_matrix(2, 3, &mut rng).matmul(&projector);
            if z.frobenius_norm() < 1e-12 {
                continue;
            }
            let candidate = a.add(&z);
            let residual_a = y.sub(&a.matmul(&x)).frobenius_norm();
            let residual_c = y.sub(&candidate.matmul(&x)).frobenius_norm();
            assert!(residual_c <= residual_a + 1e-9);
            assert!(candidate.frobenius_norm() > a.frobenius_norm());
        }
    }

    #[test]
    fn lstsq_dimension_mismatch_errors() {
        let x = Matrix::zeros(2, 3);
        let y = Matrix::zeros(2, 4);
        assert!(lstsq_min_norm(&x, &y).is_err());
    }

    #[test]
    fn lstsq_residual_beats_random_candidates() {
        let mut rng = crate::rng::SplitMix64::new(400);
        let x = random_matrix(3, 7, &mut rng);
        let y = random_matrix(2, 7, &mut rng);
        let a = lstsq_min_norm(&x, &y).unwrap();
        let best = y.sub(&a.matmul(&x)).frobenius_norm();
        for _ in 0..100 {
            let candidate = random_matrix(2, 3, &mut rng);
            let res = y.sub(&candidate.matmul(&x)).frobenius_norm();
            assert!(best <= res + 1e-12);
        }
    }
}
