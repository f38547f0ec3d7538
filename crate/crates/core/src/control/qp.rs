use crate::error::{CoreError, Result};
use crate::numerics::Matrix;

/// Box-constrained quadratic program: minimize u^T H u + f . u subject to
/// |u_i| <= u_max. H is symmetric positive semidefinite by construction.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: Matrix,
    pub f: Vec<f64>,
    pub u_max: f64,
}

impl QpProblem {
    pub fn dim(&self) -> usize {
        self.f.len()
    }

    /// Objective value at a point.
    pub fn objective(&self, u: &[f64]) -> f64 {
        let hu = self.h.matvec(u);
        u.iter().zip(&hu).map(|(a, b)| a * b).sum::<f64>()
            + u.iter().zip(&self.f).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Eliminate the latent dynamics equality constraints from the finite-
/// horizon cost, leaving a quadratic in the input sequence alone.
///
/// The cost is sum over t = 1..=horizon of (c_t - goal)^T (q I) (c_t - goal)
/// plus r u_t^2 for t = 1..horizon, under c_{t+1} = A c_t + B u_t with c_1
/// given. Decision variables are the horizon - 1 inputs; the u-independent
/// constant term is dropped.
pub fn condense_qp(
    a: &Matrix,
    b: &Matrix,
    c1: &[f64],
    c_goal: &[f64],
    horizon: usize,
    q_weight: f64,
    r_value: f64,
    u_max: f64,
) -> Result<QpProblem> {
    let m = a.rows();
    if a.cols() != m || b.rows() != m || c1.len() != m || c_goal.len() != m {
        return Err(CoreError::DimensionMismatch(format!(
            "condense_qp: A {}x{}, B {}x{}, c1 {}, goal {}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols(),
            c1.len(),
            c_goal.len()
        )));
    }
    if b.cols() != 1 {
        return Err(CoreError::DimensionMismatch(
            "condense_qp expects a single input channel".to_string(),
        ));
    }
    if horizon < 2 {
        return Err(CoreError::InvalidArgument(
            "horizon must be at least 2 so there is an input to choose".to_string(),
        ));
    }
    // A zero bound degenerates the box to {0}, which the solver handles.
    if r_value < 0.0 || q_weight < 0.0 || u_max < 0.0 {
        return Err(CoreError::InvalidArgument(
            "condense_qp needs q, r >= 0 and u_max >= 0".to_string(),
        ));
    }
    let vars = horizon - 1;

    // Free evolution error e_t = A^{t-1} c1 - goal for t = 1..=horizon, and
    // input response columns A^j B.
    let mut free = vec![c1.to_vec()];
    for _ in 1..horizon {
        free.push(a.matvec(free.last().expect("non-empty")));
    }
    let errors: Vec<Vec<f64>> = free
        .iter()
        .map(|c| c.iter().zip(c_goal).map(|(x, g)| x - g).collect())
        .collect();
    let mut powers_b = vec![b.column(0)];
    for _ in 1..vars {
        powers_b.push(a.matvec(powers_b.last().expect("non-empty")));
    }

    // c_t depends on input k (1-based) through A^{t-1-k} B for k < t.
    let response = |t: usize, k: usize| -> &Vec<f64> { &powers_b[t - 1 - k] };

    let mut h = Matrix::zeros(vars, vars);
    let mut f = vec![0.0; vars];
    for k in 1..=vars {
        for l in k..=vars {
            let mut acc = 0.0;
            for t in (l + 1)..=horizon {
                let gk = response(t, k);
                let gl = response(t, l);
                acc += gk.iter().zip(gl).map(|(x, y)| x * y).sum::<f64>();
            }
            acc *= q_weight;
            if k == l {
                acc += r_value;
            }
            h[(k - 1, l - 1)] = acc;
            h[(l - 1, k - 1)] = acc;
        }
        let mut lin = 0.0;
        for t in (k + 1)..=horizon {
            let gk = response(t, k);
            lin += gk.iter().zip(&errors[t - 1]).map(|(x, e)| x * e).sum::<f64>();
        }
        f[k - 1] = 2.0 * q_weight * lin;
    }
    Ok(QpProblem { h, f, u_max })
}

/// Result of the projected-gradient solve.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub u: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

const PG_TOL: f64 = 1e-8;
const PG_MAX_ITERS: usize = 10_000;

fn clamp_box(u: &mut [f64], bound: f64) {
    for v in u.iter_mut() {
        *v = v.clamp(-bound, bound);
    }
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration from a
/// deterministic start vector.
pub fn largest_eigenvalue(h: &Matrix) -> f64 {
    let n = h.rows();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let hv = h.matvec(&v);
        let norm = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return 0.0;
        }
        let next: Vec<f64> = hv.iter().map(|x| x / norm).collect();
        let new_lambda: f64 = next
            .iter()
            .zip(&h.matvec(&next))
            .map(|(a, b)| a * b)
            .sum();
        if (new_lambda - lambda).abs() <= 1e-13 * new_lambda.abs().max(1.0) {
            return new_lambda;
        }
        lambda = new_lambda;
        v = next;
    }
    lambda
}

/// Projected gradient descent with fixed step 1 / L, L the gradient
/// Lipschitz constant. Every iterate satisfies the box; the objective is
/// non-increasing along the way. Hitting the iteration cap returns the best
/// iterate flagged as non-converged.
pub fn solve_box_qp(problem: &QpProblem) -> Result<QpSolution> {
    let n = problem.dim();
    if problem.h.rows() != n || problem.h.cols() != n {
        return Err(CoreError::DimensionMismatch(
            "H shape does not match f".to_string(),
        ));
    }
    let sym_err = problem.h.sub(&problem.h.transpose()).frobenius_norm();
    if sym_err > 1e-12 * problem.h.frobenius_norm().max(1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "H is not symmetric (asymmetry {sym_err:e})"
        )));
    }
    // Gradient of u^T H u + f.u is 2 H u + f, so L = 2 lambda_max(H).
    let lipschitz = (2.0 * largest_eigenvalue(&problem.h)).max(1e-12);
    let step = 1.0 / lipschitz;

    let mut u = vec![0.0; n];
    clamp_box(&mut u, problem.u_max);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < PG_MAX_ITERS {
        iterations += 1;
        let hu = problem.h.matvec(&u);
        let mut next: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, &ui)| ui - step * (2.0 * hu[i] + problem.f[i]))
            .collect();
        clamp_box(&mut next, problem.u_max);
        let pg_norm = u
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / step;
        u = next;
        if pg_norm < PG_TOL {
            converged = true;
            break;
        }
    }
    Ok(QpSolution {
        objective: problem.objective(&u),
        u,
        converged,
        iterations,
    })
}
