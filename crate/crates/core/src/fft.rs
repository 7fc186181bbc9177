//! FFT-diagonalized solver for the ADMM X-subproblem.
//!
//! Both solvers repeatedly solve `(c I + sum_n c_n D_n* D_n) X = H` where
//! `D_n` are the circular difference operators. Each `D_n* D_n` is
//! block-circulant, so the whole operator is diagonal in the 3-D DFT
//! basis: the solve is one forward FFT, an element-wise division by the
//! transfer-function field, and one inverse FFT. Forward and inverse are
//! paired, so the backend's normalization convention cancels.

use crate::error::{Error, Result};
use crate::par;
use ndarray::{Array2, Array3};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Squared transfer-function magnitudes of a length-`n` circular
/// difference kernel: `|1 - e^{2 pi i l / n}|^2 = 2 - 2 cos(2 pi l / n)`.
fn axis_eigenvalues(n: usize) -> Vec<f64> {
    (0..n)
        .map(|l| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * l as f64 / n as f64).cos())
        .collect()
}

/// The `h x w x s` field `sum_n |fftn(D_n)|^2`: eigenvalues of
/// `sum_n D_n* D_n` at each frequency. Entry (0,0,0) is exactly zero
/// (differences annihilate constants) and every entry lies in `[0, 12]`.
pub fn build_fft_denominator(h: usize, w: usize, s: usize) -> Array3<f64> {
    let (th, tw, ts) = (
        axis_eigenvalues(h),
        axis_eigenvalues(w),
        axis_eigenvalues(s),
    );
    Array3::from_shape_fn((h, w, s), |(i, j, k)| th[i] + tw[j] + ts[k])
}

/// Weights of the regularized system `(ident I + sum_n grad[n] D_n* D_n)`.
#[derive(Debug, Clone, Copy)]
pub struct SolveWeights {
    pub grad: [f64; 3],
    pub ident: f64,
}

impl SolveWeights {
    pub fn new(grad: [f64; 3], ident: f64) -> Result<Self> {
        if !ident.is_finite() || ident <= 0.0 {
            return Err(Error::invalid(format!(
                "identity weight must be positive, got {ident}"
            )));
        }
        if grad.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::invalid(format!(
                "gradient weights must be non-negative, got {grad:?}"
            )));
        }
        Ok(SolveWeights { grad, ident })
    }

    /// The denoising system `(mu I + mu sum_n D_n* D_n)`.
    pub fn uniform(mu: f64) -> Result<Self> {
        SolveWeights::new([mu; 3], mu)
    }

    fn is_uniform(&self) -> bool {
        self.grad[0] == self.grad[1] && self.grad[1] == self.grad[2]
    }
}

/// Assembled right-hand side of the X system: the `hw x s` matrix `hx`
/// plus the precomputed denominator field `tx`.
pub struct LinearSystemRhs<'a> {
    pub hx: Array2<f64>,
    pub tx: &'a Array3<f64>,
}

impl<'a> LinearSystemRhs<'a> {
    pub fn new(hx: Array2<f64>, tx: &'a Array3<f64>) -> Result<Self> {
        let (h, w, s) = tx.dim();
        if hx.dim() != (h * w, s) {
            return Err(Error::shape(
                format!("{}x{} rhs", h * w, s),
                format!("{}x{}", hx.nrows(), hx.ncols()),
            ));
        }
        if tx.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("denominator field must be non-negative"));
        }
        Ok(LinearSystemRhs { hx, tx })
    }
}

/// Cached FFT plans (and axis eigenvalues) for one cube size.
pub struct Fft3 {
    h: usize,
    w: usize,
    s: usize,
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
    eig: [Vec<f64>; 3],
}

impl Fft3 {
    pub fn new(h: usize, w: usize, s: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = [
            planner.plan_fft_forward(h),
            planner.plan_fft_forward(w),
            planner.plan_fft_forward(s),
        ];
        let inv = [
            planner.plan_fft_inverse(h),
            planner.plan_fft_inverse(w),
            planner.plan_fft_inverse(s),
        ];
        Fft3 {
            h,
            w,
            s,
            fwd,
            inv,
            eig: [
                axis_eigenvalues(h),
                axis_eigenvalues(w),
                axis_eigenvalues(s),
            ],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.s)
    }

    /// Unnormalized forward 3-D DFT of a C-order `(h, w, s)` cube.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Inverse 3-D DFT scaled by `1/(h w s)`, the exact inverse of
    /// [`Fft3::forward`].
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / (self.h * self.w * self.s) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.h * self.w * self.s, "cube length");
        let plans = if inverse { &self.inv } else { &self.fwd };
        // Axis 2 lanes are contiguous rows of length s.
        par::for_each_chunk_mut(data, self.s, |_, lane| {
            plans[2].process(lane);
        });
        self.strided_pass(data, 1, &plans[1]);
        self.strided_pass(data, 0, &plans[0]);
    }

    /// FFT along a strided axis: gather lanes into a contiguous scratch
    /// cube, transform the lanes in parallel, scatter back.
    fn strided_pass(&self, data: &mut [Complex64], axis: usize, plan: &Arc<dyn Fft<f64>>) {
        let (h, w, s) = (self.h, self.w, self.s);
        let (len, n_lanes) = match axis {
            0 => (h, w * s),
            1 => (w, h * s),
            _ => unreachable!(),
        };
        if len == 1 {
            return;
        }
        let mut scratch = vec![Complex64::default(); len * n_lanes];
        {
            let data_ref: &[Complex64] = data;
            par::for_each_chunk_mut(&mut scratch, len, |lane, buf| {
                for (t, slot) in buf.iter_mut().enumerate() {
                    *slot = data_ref[lane_index(axis, lane, t, h, w, s)];
                }
                plan.process(buf);
            });
        }
        for lane in 0..n_lanes {
            for t in 0..len {
                data[lane_index(axis, lane, t, h, w, s)] = scratch[lane * len + t];
            }
        }
    }
}

/// Flat C-order index of lane element `t` along `axis`.
fn lane_index(axis: usize, lane: usize, t: usize, _h: usize, w: usize, s: usize) -> usize {
    match axis {
        // lane = j*s + k, element i = t
        0 => t * (w * s) + lane,
        // lane = i*s + k, element j = t
        1 => {
            let i = lane / s;
            let k = lane % s;
            i * (w * s) + t * s + k
        }
        _ => unreachable!(),
    }
}

/// Solve `(ident I + sum_n grad[n] D_n* D_n) X = hx` by FFT
/// diagonalization. The right-hand side is given in unfolded `hw x s`
/// form; the result comes back the same way.
pub fn solve_x_system(
    rhs: &LinearSystemRhs,
    weights: &SolveWeights,
    fft: &Fft3,
) -> Result<Array2<f64>> {
    let (h, w, s) = fft.dims();
    if rhs.tx.dim() != (h, w, s) {
        return Err(Error::shape(
            format!("{h}x{w}x{s} field"),
            format!("{:?}", rhs.tx.dim()),
        ));
    }
    if rhs.hx.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear system rhs".into()));
    }

    let mut cube = vec![Complex64::default(); h * w * s];
    for k in 0..s {
        for j in 0..w {
            for i in 0..h {
                cube[i * (w * s) + j * s + k] = Complex64::new(rhs.hx[(i + j * h, k)], 0.0);
            }
        }
    }
    fft.forward(&mut cube);

    if weights.is_uniform() {
        let g = weights.grad[0];
        let tx = rhs
            .tx
            .as_slice()
            .expect("denominator field in standard layout");
        par::for_each_chunk_mut(&mut cube, s, |row, lane| {
            for (k, v) in lane.iter_mut().enumerate() {
                *v /= weights.ident + g * tx[row * s + k];
            }
        });
    } else {
        let eig = &fft.eig;
        let grad = weights.grad;
        let ident = weights.ident;
        par::for_each_chunk_mut(&mut cube, s, |row, lane| {
            let i = row / w;
            let j = row % w;
            let base = grad[0] * eig[0][i] + grad[1] * eig[1][j];
            for (k, v) in lane.iter_mut().enumerate() {
                *v /= ident + base + grad[2] * eig[2][k];
            }
        });
    }

    fft.inverse(&mut cube);
    let mut out = Array2::zeros((h * w, s));
    for k in 0..s {
        for j in 0..w {
            for i in 0..h {
                out[(i + j * h, k)] = cube[i * (w * s) + j * s + k].re;
            }
        }
    }
    Ok(out)
}
