use super::{dot, norm, SparseOperator};
use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

fn project_mean_zero(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Jacobi-preconditioned conjugate gradients; `gauge` projects every vector
/// onto the mean-zero subspace.
fn pcg(op: &SparseOperator, rhs: &[f64], tol: f64, gauge: bool) -> Result<Vec<f64>> {
    let n = op.dimension();
    if rhs.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: rhs.len(),
        });
    }
    let mut b = rhs.to_vec();
    if gauge {
        project_mean_zero(&mut b);
    }
    let b_norm = norm(&b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let inv_diag: Vec<f64> = op
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let target = tol * b_norm;
    let cap = 20 * n.max(1);
    let mut r = b.clone();
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = b_norm;
    // restart from the true residual if the recursive one drifted below the target
    while iterations < cap {
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        if gauge {
            project_mean_zero(&mut z);
        }
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut breakdown = false;
        while iterations < cap {
            op.apply_into(&p, &mut q);
            if gauge {
                project_mean_zero(&mut q);
            }
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                breakdown = true;
                break;
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            iterations += 1;
            residual = norm(&r);
            if residual <= target {
                break;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            if gauge {
                project_mean_zero(&mut z);
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let ax = op.apply(&x);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        if gauge {
            project_mean_zero(&mut r);
        }
        residual = norm(&r);
        if residual <= target {
            return Ok(x);
        }
        if breakdown || !residual.is_finite() {
            break;
        }
    }
    Err(Error::Solver {
        iterations,
        residual: residual / b_norm,
        tolerance: tol,
    })
}

/// Solve `A u = b` for symmetric positive definite `A` to relative residual `tol`.
pub fn solve_spd(op: &SparseOperator, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    pcg(op, rhs, tol, false)
}

/// Solve a semidefinite system whose kernel is the constants: the rhs is
/// projected onto, and the solution sought in, the mean-zero subspace.
pub fn solve_spd_semidefinite(op: &SparseOperator, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    pcg(op, rhs, tol, true)
}
