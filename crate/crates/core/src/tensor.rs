//! Hyperspectral tensor representation and circular difference operators.
//!
//! An HSI cube of size `h x w x s` is stored through its mode-3 unfolding:
//! an `hw x s` matrix whose row `p = i + j*h` enumerates spatial positions
//! in column-major order (height index fastest) and whose column `k`
//! enumerates spectral bands. With this layout `unfold3` is a zero-copy
//! view and `fold3` its exact inverse.
//!
//! The three difference operators are circular (periodic) so that their
//! normal operators are diagonalized exactly by the 3-D DFT; see
//! [`crate::fft`].

use crate::error::{Error, Result};
use crate::par;
use ndarray::Array2;

/// Difference mode: spatial height, spatial width, or spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Height,
    Width,
    Spectrum,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Height, Mode::Width, Mode::Spectrum];

    /// Zero-based index (0 = height, 1 = width, 2 = spectrum).
    pub fn index(self) -> usize {
        match self {
            Mode::Height => 0,
            Mode::Width => 1,
            Mode::Spectrum => 2,
        }
    }
}

/// A dense `h x w x s` hyperspectral cube stored via its mode-3 unfolding.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiTensor {
    h: usize,
    w: usize,
    s: usize,
    data: Array2<f64>, // hw x s, row p = i + j*h
}

impl HsiTensor {
    /// Build from intensities in canonical order: index `(i + j*h) + hw*k`.
    pub fn new(h: usize, w: usize, s: usize, values: &[f64]) -> Result<Self> {
        check_dims(h, w, s)?;
        if values.len() != h * w * s {
            return Err(Error::shape(
                format!("{} values", h * w * s),
                format!("{}", values.len()),
            ));
        }
        let mut data = Array2::zeros((h * w, s));
        for k in 0..s {
            for p in 0..h * w {
                data[(p, k)] = values[p + h * w * k];
            }
        }
        let t = HsiTensor { h, w, s, data };
        t.check_finite()?;
        Ok(t)
    }

    /// Fold an `hw x s` unfolded matrix back into a tensor (exact inverse
    /// of [`HsiTensor::unfold3`]).
    pub fn fold3(mat: Array2<f64>, h: usize, w: usize) -> Result<Self> {
        check_dims(h, w, mat.ncols())?;
        if mat.nrows() != h * w {
            return Err(Error::shape(
                format!("{} rows", h * w),
                format!("{}", mat.nrows()),
            ));
        }
        let t = HsiTensor {
            h,
            w,
            s: mat.ncols(),
            data: mat,
        };
        t.check_finite()?;
        Ok(t)
    }

    pub fn zeros(h: usize, w: usize, s: usize) -> Self {
        HsiTensor {
            h,
            w,
            s,
            data: Array2::zeros((h * w, s)),
        }
    }

    /// Build from a voxel function.
    pub fn from_fn(
        h: usize,
        w: usize,
        s: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(h, w, s)?;
        let mut data = Array2::zeros((h * w, s));
        for k in 0..s {
            for j in 0..w {
                for i in 0..h {
                    data[(i + j * h, k)] = f(i, j, k);
                }
            }
        }
        let t = HsiTensor { h, w, s, data };
        t.check_finite()?;
        Ok(t)
    }

    pub fn h(&self) -> usize {
        self.h
    }
    pub fn w(&self) -> usize {
        self.w
    }
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.s)
    }
    pub fn len(&self) -> usize {
        self.h * self.w * self.s
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mode-3 unfolding, `hw x s`. Zero-copy: the matrix is the storage.
    pub fn unfold3(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_unfold3(self) -> Array2<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i + j * self.h, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i + j * self.h, k)] = v;
    }

    /// Intensities in canonical order (index `(i + j*h) + hw*k`).
    pub fn to_canonical_vec(&self) -> Vec<f64> {
        let hw = self.h * self.w;
        let mut out = vec![0.0; hw * self.s];
        for k in 0..self.s {
            for p in 0..hw {
                out[p + hw * k] = self.data[(p, k)];
            }
        }
        out
    }

    fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("tensor intensities".into()))
        }
    }
}

fn check_dims(h: usize, w: usize, s: usize) -> Result<()> {
    if h == 0 || w == 0 || s == 0 {
        return Err(Error::invalid(format!(
            "dimensions must be positive, got {h}x{w}x{s}"
        )));
    }
    Ok(())
}

/// The three gradient maps of a tensor, one per difference mode.
#[derive(Debug, Clone)]
pub struct GradientStack {
    pub g1: HsiTensor,
    pub g2: HsiTensor,
    pub g3: HsiTensor,
}

/// All three circular gradient maps of `x`.
pub fn gradient_stack(x: &HsiTensor) -> GradientStack {
    GradientStack {
        g1: diff(x, Mode::Height),
        g2: diff(x, Mode::Width),
        g3: diff(x, Mode::Spectrum),
    }
}

/// Circular difference along `mode`:
/// `g(i,j,k) = x(i,j,k) - x(next index along mode, wrapping)`.
pub fn diff(x: &HsiTensor, mode: Mode) -> HsiTensor {
    let (h, w, _s) = x.dims();
    let data = diff_mat(x.unfold3(), h, w, mode);
    HsiTensor { h, w, s: x.s, data }
}

/// Adjoint of [`diff`]: satisfies `<diff(x), y> = <x, diff_adjoint(y)>`.
pub fn diff_adjoint(g: &HsiTensor, mode: Mode) -> HsiTensor {
    let (h, w, _s) = g.dims();
    let data = diff_adjoint_mat(g.unfold3(), h, w, mode).expect("dims taken from tensor");
    HsiTensor { h, w, s: g.s, data }
}

fn spatial_neighbor(p: usize, h: usize, w: usize, mode: Mode, forward: bool) -> usize {
    let i = p % h;
    let j = p / h;
    match (mode, forward) {
        (Mode::Height, true) => (i + 1) % h + j * h,
        (Mode::Height, false) => (i + h - 1) % h + j * h,
        (Mode::Width, true) => i + ((j + 1) % w) * h,
        (Mode::Width, false) => i + ((j + w - 1) % w) * h,
        (Mode::Spectrum, _) => unreachable!("spectrum handled per row"),
    }
}

/// Circular difference on an unfolded `hw x s` matrix.
pub fn diff_mat(x: &Array2<f64>, h: usize, w: usize, mode: Mode) -> Array2<f64> {
    let (hw, s) = x.dim();
    debug_assert_eq!(hw, h * w);
    let mut out = Array2::zeros((hw, s));
    let out_slice = out
        .as_slice_mut()
        .expect("freshly allocated, standard layout");
    match mode {
        Mode::Spectrum => {
            par::for_each_chunk_mut(out_slice, s, |p, row| {
                for k in 0..s {
                    row[k] = x[(p, k)] - x[(p, (k + 1) % s)];
                }
            });
        }
        _ => {
            par::for_each_chunk_mut(out_slice, s, |p, row| {
                let p2 = spatial_neighbor(p, h, w, mode, true);
                for k in 0..s {
                    row[k] = x[(p, k)] - x[(p2, k)];
                }
            });
        }
    }
    out
}

/// Adjoint of [`diff_mat`] on an unfolded `hw x s` matrix.
pub fn diff_adjoint_mat(g: &Array2<f64>, h: usize, w: usize, mode: Mode) -> Result<Array2<f64>> {
    let (hw, s) = g.dim();
    if hw != h * w {
        return Err(Error::shape(format!("{} rows", h * w), format!("{hw}")));
    }
    let mut out = Array2::zeros((hw, s));
    let out_slice = out
        .as_slice_mut()
        .expect("freshly allocated, standard layout");
    match mode {
        Mode::Spectrum => {
            par::for_each_chunk_mut(out_slice, s, |p, row| {
                for k in 0..s {
                    row[k] = g[(p, k)] - g[(p, (k + s - 1) % s)];
                }
            });
        }
        _ => {
            par::for_each_chunk_mut(out_slice, s, |p, row| {
                let p2 = spatial_neighbor(p, h, w, mode, false);
                for k in 0..s {
                    row[k] = g[(p, k)] - g[(p2, k)];
                }
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor_from(v: &[f64], h: usize, w: usize, s: usize) -> HsiTensor {
        HsiTensor::new(h, w, s, v).unwrap()
    }

    #[test]
    fn unfold_degenerate_spatial() {
        let t = tensor_from(&[1.0, 2.0, 3.0], 1, 1, 3);
        let m = t.unfold3();
        assert_eq!(m.dim(), (1, 3));
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m[(0, 2)], 3.0);
    }

    #[test]
    fn unfold_single_band_order() {
        // 2x2x1, canonical order: (0,0) (1,0) (0,1) (1,1)
        let t = tensor_from(&[10.0, 20.0, 30.0, 40.0], 2, 2, 1);
        let m = t.unfold3();
        assert_eq!(m.dim(), (4, 1));
        assert_eq!(m[(0, 0)], t.get(0, 0, 0));
        assert_eq!(m[(1, 0)], t.get(1, 0, 0));
        assert_eq!(m[(2, 0)], t.get(0, 1, 0));
        assert_eq!(m[(3, 0)], t.get(1, 1, 0));
        assert_eq!(m[(1, 0)], 20.0);
        assert_eq!(m[(2, 0)], 30.0);
    }

    #[test]
    fn fold_unfold_roundtrip() {
        let vals: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        let t = tensor_from(&vals, 3, 4, 5);
        let rt = HsiTensor::fold3(t.unfold3().clone(), 3, 4).unwrap();
        assert_eq!(t, rt);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(HsiTensor::new(1, 1, 2, &[1.0, f64::NAN]).is_err());
        assert!(HsiTensor::new(1, 1, 2, &[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(HsiTensor::new(2, 2, 2, &[0.0; 7]).is_err());
        assert!(HsiTensor::new(0, 2, 2, &[]).is_err());
    }

    #[test]
    fn diff_constant_is_zero() {
        let t = HsiTensor::from_fn(3, 4, 5, |_, _, _| 5.0).unwrap();
        for mode in Mode::ALL {
            let g = diff(&t, mode);
            assert!(g.unfold3().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn diff_mode3_enumeration() {
        // 1x1x4 [1,3,0,2] -> [-2, 3, -2, 1], last entry wraps to first.
        let t = tensor_from(&[1.0, 3.0, 0.0, 2.0], 1, 1, 4);
        let g = diff(&t, Mode::Spectrum);
        let got: Vec<f64> = (0..4).map(|k| g.get(0, 0, k)).collect();
        assert_eq!(got, vec![-2.0, 3.0, -2.0, 1.0]);
    }

    #[test]
    fn diff_impulse_two_nonzeros() {
        let (h, w, s) = (4, 3, 2);
        let (ii, jj, kk) = (2, 1, 1);
        let t = HsiTensor::from_fn(
            h,
            w,
            s,
            |i, j, k| {
                if (i, j, k) == (ii, jj, kk) {
                    1.0
                } else {
                    0.0
                }
            },
        )
        .unwrap();
        let g = diff(&t, Mode::Height);
        let mut nonzeros = Vec::new();
        for i in 0..h {
            for j in 0..w {
                for k in 0..s {
                    let v = g.get(i, j, k);
                    if v != 0.0 {
                        nonzeros.push(((i, j, k), v));
                    }
                }
            }
        }
        nonzeros.sort_by_key(|&((i, j, k), _)| (i, j, k));
        assert_eq!(
            nonzeros,
            vec![(((ii + h - 1) % h, jj, kk), -1.0), ((ii, jj, kk), 1.0),]
        );
    }

    #[test]
    fn adjoint_mode3_explicit_circulant() {
        // Transpose of the explicit 4x4 circulant difference matrix maps
        // [1,0,0,0] to [1,-1,0,0].
        let y = tensor_from(&[1.0, 0.0, 0.0, 0.0], 1, 1, 4);
        let out = diff_adjoint(&y, Mode::Spectrum);
        let got: Vec<f64> = (0..4).map(|k| out.get(0, 0, k)).collect();
        assert_eq!(got, vec![1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn adjoint_zero_map() {
        let z = HsiTensor::zeros(3, 3, 2);
        for mode in Mode::ALL {
            let out = diff_adjoint(&z, mode);
            assert!(out.unfold3().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn adjoint_mat_shape_mismatch_errors() {
        let g = Array2::<f64>::zeros((5, 2));
        assert!(diff_adjoint_mat(&g, 2, 2, Mode::Height).is_err());
    }

    fn inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn adjoint_inner_product_identity() {
        let mut rng_state = 0x12345u64;
        let mut next = move || {
            // xorshift, test-local randomness
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        let (h, w, s) = (3, 3, 2);
        for _ in 0..20 {
            let x = Array2::from_shape_fn((h * w, s), |_| next());
            let y = Array2::from_shape_fn((h * w, s), |_| next());
            for mode in Mode::ALL {
                let gx = diff_mat(&x, h, w, mode);
                let aty = diff_adjoint_mat(&y, h, w, mode).unwrap();
                let lhs = inner(&gx, &y);
                let rhs = inner(&x, &aty);
                let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt()
                    * y.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * scale.max(1.0),
                    "mode {mode:?}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn mode3_difference_preserves_rank_bound() {
        // rank(D_3 X) <= rank(X): D_3 acts by column mixing, so a rank-2
        // X keeps sigma_3 at the noise floor.
        let mut state = 0xBEEFu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        let (h, w, s, r) = (4, 5, 6, 2);
        let a = Array2::from_shape_fn((h * w, r), |_| next());
        let b = Array2::from_shape_fn((s, r), |_| next());
        let x = a.dot(&b.t());
        let g = diff_mat(&x, h, w, Mode::Spectrum);
        let (_, sigma, _) = crate::linalg::svd_thin(&g).unwrap();
        assert!(sigma[r] / sigma[0] <= 1e-10, "sigma {:?}", &sigma[..4]);
    }

    proptest! {
        #[test]
        fn prop_fold_unfold_roundtrip(vals in proptest::collection::vec(-1e3f64..1e3, 24)) {
            let t = tensor_from(&vals, 2, 3, 4);
            let rt = HsiTensor::fold3(t.unfold3().clone(), 2, 3).unwrap();
            prop_assert_eq!(t, rt);
        }

        #[test]
        fn prop_diff_linearity_exact(seed in 0u64..1000) {
            // Integer-valued inputs and power-of-two coefficients keep all
            // arithmetic exact, so linearity must hold bitwise.
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut next_int = move || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                ((state % 41) as f64 - 20.0) * 2.0
            };
            let (h, w, s) = (3, 2, 4);
            let x = Array2::from_shape_fn((h * w, s), |_| next_int());
            let y = Array2::from_shape_fn((h * w, s), |_| next_int());
            let (alpha, beta) = (2.0, 0.5);
            let combo = alpha * &x + beta * &y;
            for mode in Mode::ALL {
                let lhs = diff_mat(&combo, h, w, mode);
                let rhs = alpha * &diff_mat(&x, h, w, mode) + beta * &diff_mat(&y, h, w, mode);
                prop_assert_eq!(&lhs, &rhs);
            }
        }
    }
}
