//! Lawson–Hanson active-set solver for `min_{γ ≥ 0} ‖Aγ − b‖²`.
//!
//! Entering index: the largest entry of the negative gradient `Aᵀ(b − Aγ)`,
//! smallest index on ties. Termination is exact for moderate column counts;
//! the outer iteration count is capped by the caller.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub coefficients: DVector<f64>,
    pub iterations: usize,
}

pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iterations: usize) -> Result<NnlsSolution> {
    let (m, k) = a.shape();
    assert_eq!(m, b.len(), "nnls: row count of A must match b");
    let mut x = DVector::<f64>::zeros(k);
    let b_norm = b.norm();
    if k == 0 || b_norm == 0.0 {
        return Ok(NnlsSolution { coefficients: x, iterations: 0 });
    }
    let tol = 10.0 * (m.max(k) as f64) * f64::EPSILON * a.norm() * b_norm;

    let mut passive = vec![false; k];
    // Columns whose entry failed (z_j ≤ 0 right after entering); cleared
    // whenever the iterate moves.
    let mut blocked = vec![false; k];
    let mut iterations = 0;

    loop {
        let w = a.tr_mul(&(b - a * &x));
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..k {
            if passive[j] || blocked[j] || w[j] <= tol {
                continue;
            }
            if entering.is_none_or(|(_, best)| w[j] > best) {
                entering = Some((j, w[j]));
            }
        }
        let Some((j, _)) = entering else { break };

        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::SolverNonconvergence { iterations: max_iterations });
        }
        passive[j] = true;

        let mut first = true;
        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let z = passive_least_squares(a, b, &idx);
            if first {
                first = false;
                let pos = idx.iter().position(|&i| i == j).unwrap();
                if z[pos] <= 0.0 {
                    passive[j] = false;
                    blocked[j] = true;
                    break;
                }
            }
            if z.iter().all(|&v| v > 0.0) {
                for (p, &i) in idx.iter().enumerate() {
                    x[i] = z[p];
                }
                blocked.iter_mut().for_each(|v| *v = false);
                break;
            }
            let mut alpha = f64::INFINITY;
            let mut leaving = idx[0];
            for (p, &i) in idx.iter().enumerate() {
                if z[p] <= 0.0 {
                    let step = x[i] / (x[i] - z[p]);
                    if step < alpha {
                        alpha = step;
                        leaving = i;
                    }
                }
            }
            for (p, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z[p] - x[i]);
            }
            x[leaving] = 0.0;
            for &i in &idx {
                if x[i] <= 0.0 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            blocked.iter_mut().for_each(|v| *v = false);
        }
    }

    Ok(NnlsSolution { coefficients: x, iterations })
}

/// Householder QR when the selected columns have full rank, SVD otherwise.
fn passive_least_squares(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(idx);
    let (m, p) = sub.shape();
    let scale = (m.max(p) as f64) * f64::EPSILON * sub.norm();
    if p <= m {
        let qr = sub.clone().qr();
        let r = qr.r();
        if r.diagonal().iter().all(|d| d.abs() > scale) {
            let q = qr.q();
            if let Some(mut z) = r.solve_upper_triangular(&q.tr_mul(b)) {
                // One step of iterative refinement on the residual.
                let resid = b - &sub * &z;
                if let Some(dz) = r.solve_upper_triangular(&q.tr_mul(&resid)) {
                    z += dz;
                }
                return z;
            }
        }
    }
    let svd = sub.svd(true, true);
    let eps = (m.max(p) as f64) * f64::EPSILON * svd.singular_values.max();
    svd.solve(b, eps).expect("SVD computed with both factors")
}
