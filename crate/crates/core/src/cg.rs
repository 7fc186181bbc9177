//! Matrix-free conjugate gradient for symmetric positive-definite
//! operators.

use crate::error::{Error, Result};

/// Outcome of a CG solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Relative residual history, one entry per iteration.
    pub residuals: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` for SPD `A` given as a closure, starting from `x0`,
/// to relative residual `tol` (measured against `||b||`).
pub fn solve<F>(apply: F, b: &[f64], x0: &[f64], tol: f64, max_iters: usize) -> Result<CgOutcome>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    assert_eq!(b.len(), x0.len());
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: vec![0.0; b.len()],
            iterations: 0,
            residuals: Vec::new(),
        });
    }

    let mut x = x0.to_vec();
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let mut p = r.clone();
    let mut rs_old = dot(&r, &r);
    let mut residuals = Vec::new();

    if rs_old.sqrt() <= tol * b_norm {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            residuals,
        });
    }

    for iter in 1..=max_iters {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(Error::Numerical(format!(
                "CG encountered a non-SPD direction (p^T A p = {pap:.3e})"
            )));
        }
        let alpha = rs_old / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        let rel = rs_new.sqrt() / b_norm;
        residuals.push(rel);
        if rel <= tol {
            return Ok(CgOutcome {
                solution: x,
                iterations: iter,
                residuals,
            });
        }
        let beta = rs_new / rs_old;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }

    Err(Error::CgDiverged {
        max_iters,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}
