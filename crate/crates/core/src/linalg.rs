//! Small dense linear-algebra helpers shared by the regularizer and the
//! solvers (SVD-based subspace extraction, orthonormal sampling).

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;

pub fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD `a = u diag(sigma) v^T` with singular values descending.
pub fn svd_thin(a: &Array2<f64>) -> Result<(Array2<f64>, Vec<f64>, Array2<f64>)> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SVD input".into()));
    }
    let svd = nalgebra::SVD::try_new(to_na(a), true, true, f64::EPSILON, 1000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    Ok((
        from_na(&u),
        svd.singular_values.iter().copied().collect(),
        from_na(&v_t.transpose()),
    ))
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(sigma: &[f64], rel_tol: f64) -> usize {
    let smax = sigma.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Leading `r` right singular vectors of `a` as an `ncols x r` matrix.
/// Falls back to identity columns when `a` is (numerically) zero.
pub fn top_right_singular_vectors(a: &Array2<f64>, r: usize) -> Result<Array2<f64>> {
    let n = a.ncols();
    assert!(r <= n, "r = {r} exceeds column count {n}");
    let (_, sigma, v) = svd_thin(a)?;
    let smax = sigma.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return Ok(Array2::from_shape_fn((n, r), |(i, j)| {
            if i == j {
                1.0
            } else {
                0.0
            }
        }));
    }
    let mut out = Array2::zeros((n, r));
    for j in 0..r.min(v.ncols()) {
        for i in 0..n {
            out[(i, j)] = v[(i, j)];
        }
    }
    // If the thin SVD returned fewer columns than requested, pad with
    // identity columns orthogonalized against the rest.
    if v.ncols() < r {
        complete_orthonormal(&mut out, v.ncols());
    }
    Ok(out)
}

/// Gram-Schmidt completion of columns `from..` against the earlier ones.
fn complete_orthonormal(v: &mut Array2<f64>, from: usize) {
    let (n, r) = v.dim();
    let mut next_axis = 0;
    for j in from..r {
        loop {
            assert!(next_axis < n, "cannot complete orthonormal basis");
            let mut col = vec![0.0; n];
            col[next_axis] = 1.0;
            next_axis += 1;
            for prev in 0..j {
                let dot: f64 = (0..n).map(|i| col[i] * v[(i, prev)]).sum();
                for i in 0..n {
                    col[i] -= dot * v[(i, prev)];
                }
            }
            let norm: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for i in 0..n {
                    v[(i, j)] = col[i] / norm;
                }
                break;
            }
        }
    }
}

/// `max |V^T V - I|` over all entries.
pub fn orthonormality_error(v: &Array2<f64>) -> f64 {
    let r = v.ncols();
    let g = v.t().dot(v);
    let mut err = 0.0f64;
    for i in 0..r {
        for j in 0..r {
            let want = if i == j { 1.0 } else { 0.0 };
            err = err.max((g[(i, j)] - want).abs());
        }
    }
    err
}

/// Random column-orthonormal `n x r` matrix: Q factor of a Gaussian.
pub fn random_orthonormal(n: usize, r: usize, rng: &mut impl Rng) -> Array2<f64> {
    assert!(r <= n);
    let g = DMatrix::from_fn(n, r, |_, _| {
        // Box-Muller keeps this independent of rand_distr.
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    });
    let qr = g.qr();
    let q = qr.q();
    Array2::from_shape_fn((n, r), |(i, j)| q[(i, j)])
}
