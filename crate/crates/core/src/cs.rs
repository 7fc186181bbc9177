//! E-3DTV compressed sensing: the permuted Walsh-Hadamard measurement
//! operator and the ADMM reconstruction solver.
//!
//! Measurements are `y = D H P z`: a random permutation, the orthonormal
//! fast Walsh-Hadamard transform, then a random row subsampling. The
//! operator lives on the power-of-two padded domain, where its rows are
//! exactly orthonormal (`Psi Psi* = I_m`) and `Psi* Psi` is an orthogonal
//! projection; the flattened cube is zero-padded into that domain and the
//! reconstruction truncates back.
//!
//! The ADMM splits `Z = X + E` with measurement consistency on `Z`:
//! `Z` by conjugate gradient on `(mu4 Psi* Psi + mu5 I)` (a two-point
//! spectrum, so CG needs only a few steps), `X` by the weighted FFT
//! solve, `U_n`/`V_n` exactly as in denoising, and `E` in closed form
//! from the Gaussian noise term. The split constraint (and its
//! multiplier) extends over the padded tail, pinning the tail of `Z` to
//! zero.

use crate::cg;
use crate::error::{Error, Result};
use crate::fft::{build_fft_denominator, solve_x_system, Fft3, LinearSystemRhs, SolveWeights};
use crate::linalg;
use crate::par;
use crate::regularizer::{procrustes_v, soft_threshold_in_place};
use crate::solver::{SolverConfig, SolverMode, SolverReport};
use crate::tensor::{diff_adjoint_mat, diff_mat, HsiTensor, Mode};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// In-place fast Walsh-Hadamard transform (natural order, unnormalized).
/// Length must be a power of two.
pub fn fwht(data: &mut [f64]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut len = 1;
    while len < n {
        let block = len * 2;
        par::for_each_chunk_mut(data, block, |_, chunk| {
            for i in 0..len {
                let (a, b) = (chunk[i], chunk[i + len]);
                chunk[i] = a + b;
                chunk[i + len] = a - b;
            }
        });
        len = block;
    }
}

/// The compressive operator `Psi = D H P` with its adjoint.
#[derive(Debug, Clone)]
pub struct CompressiveOperator {
    h: usize,
    w: usize,
    s: usize,
    /// True signal length `h w s`.
    n: usize,
    /// Power-of-two padded length.
    n_pad: usize,
    /// Permutation as an index map: `(P z)[i] = z[perm[i]]`.
    perm: Vec<u32>,
    /// Sorted measurement rows.
    sample_idx: Vec<u32>,
    m: usize,
    seed: u64,
    ratio: f64,
    scale: f64,
}

impl CompressiveOperator {
    /// Build the operator for an `h x w x s` cube at the given sampling
    /// ratio. `m = round(ratio * n)`; deterministic in `seed`.
    pub fn build(h: usize, w: usize, s: usize, ratio: f64, seed: u64) -> Result<Self> {
        if h == 0 || w == 0 || s == 0 {
            return Err(Error::invalid("operator dimensions must be positive"));
        }
        if !(ratio.is_finite() && ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::invalid(format!(
                "sampling ratio must lie in (0, 1], got {ratio}"
            )));
        }
        let n = h * w * s;
        let n_pad = n.next_power_of_two();
        let m = (ratio * n as f64).round() as usize;
        if m == 0 {
            return Err(Error::invalid(format!(
                "sampling ratio {ratio} rounds to zero measurements for n = {n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<u32> = (0..n_pad as u32).collect();
        for i in (1..n_pad).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        // Row 0 of the Hadamard domain is the all-ones row, the only one
        // observing the signal mean; gradient-based priors cannot recover
        // an unmeasured mean, so the downsampler always retains it and
        // draws the remaining rows uniformly from the rest.
        let mut rows: Vec<u32> = (1..n_pad as u32).collect();
        for i in (1..rows.len()).rev() {
            let j = rng.random_range(0..=i);
            rows.swap(i, j);
        }
        let mut sample_idx: Vec<u32> = Vec::with_capacity(m);
        sample_idx.push(0);
        sample_idx.extend_from_slice(&rows[..m - 1]);
        sample_idx.sort_unstable();

        debug_assert!({
            let mut seen = vec![false; n_pad];
            perm.iter().for_each(|&p| seen[p as usize] = true);
            seen.iter().all(|&b| b)
        });

        Ok(CompressiveOperator {
            h,
            w,
            s,
            n,
            n_pad,
            perm,
            sample_idx,
            m,
            seed,
            ratio,
            scale: 1.0 / (n_pad as f64).sqrt(),
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.s)
    }
    pub fn signal_len(&self) -> usize {
        self.n
    }
    pub fn padded_len(&self) -> usize {
        self.n_pad
    }
    pub fn measurements(&self) -> usize {
        self.m
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Zero-pad a length-`n` signal into the padded domain.
    pub fn pad(&self, z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.n);
        let mut out = vec![0.0; self.n_pad];
        out[..self.n].copy_from_slice(z);
        out
    }

    /// Truncate a padded signal back to length `n`.
    pub fn truncate(&self, z_pad: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z_pad.len(), self.n_pad);
        z_pad[..self.n].to_vec()
    }

    /// `y = D H P z`. Accepts either the true length `n` (padded
    /// internally) or the padded length.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        let padded_storage;
        let z_pad: &[f64] = if z.len() == self.n_pad {
            z
        } else if z.len() == self.n {
            padded_storage = self.pad(z);
            &padded_storage
        } else {
            return Err(Error::shape(
                format!("signal of length {} or {}", self.n, self.n_pad),
                format!("{}", z.len()),
            ));
        };
        let mut v = vec![0.0; self.n_pad];
        for (i, &p) in self.perm.iter().enumerate() {
            v[i] = z_pad[p as usize];
        }
        fwht(&mut v);
        Ok(self
            .sample_idx
            .iter()
            .map(|&r| v[r as usize] * self.scale)
            .collect())
    }

    /// Exact adjoint `Psi* y = P^T H D^T y`, on the padded domain.
    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m {
            return Err(Error::shape(
                format!("{} measurements", self.m),
                format!("{}", y.len()),
            ));
        }
        let mut v = vec![0.0; self.n_pad];
        for (t, &r) in self.sample_idx.iter().enumerate() {
            v[r as usize] = y[t];
        }
        fwht(&mut v);
        let mut out = vec![0.0; self.n_pad];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p as usize] = v[i] * self.scale;
        }
        Ok(out)
    }
}

/// All per-iteration variables of the reconstruction ADMM. `z` and
/// `gamma2` live on the padded domain; `x`, `e` and the factor variables
/// on the unfolded `hw x s` domain.
#[derive(Debug, Clone)]
pub struct CsState {
    pub z: Vec<f64>,
    pub x: Array2<f64>,
    pub e: Array2<f64>,
    pub u: [Array2<f64>; 3],
    pub v: [Array2<f64>; 3],
    pub m: [Array2<f64>; 3],
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub mu: f64,
}

pub struct CsSolver {
    h: usize,
    w: usize,
    s: usize,
    op: CompressiveOperator,
    y: Vec<f64>,
    y_norm: f64,
    cfg: SolverConfig,
    tx: Array3<f64>,
    fft: Fft3,
    pub state: CsState,
    pub last_cg_iterations: usize,
}

impl CsSolver {
    /// Initialization: `Z = Psi* y` (back-projection), `X = trunc(Z)`,
    /// `E = 0`, factors from the top right singular vectors of `D_n X`,
    /// multipliers zero.
    pub fn new(y: &[f64], op: &CompressiveOperator, cfg: &SolverConfig) -> Result<Self> {
        let (h, w, s) = op.dims();
        cfg.validate(s)?;
        if y.len() != op.measurements() {
            return Err(Error::shape(
                format!("{} measurements", op.measurements()),
                format!("{}", y.len()),
            ));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measurements".into()));
        }
        let z = op.adjoint(y)?;
        let x = mat_from_canonical(&op.truncate(&z), h, w, s);

        let rank = match cfg.mode {
            SolverMode::E3dtv => cfg.rank,
            SolverMode::Tv3dBaseline => s,
        };
        let mut u: Vec<Array2<f64>> = Vec::with_capacity(3);
        let mut v: Vec<Array2<f64>> = Vec::with_capacity(3);
        for mode in Mode::ALL {
            let g = diff_mat(&x, h, w, mode);
            let vn = match cfg.mode {
                SolverMode::E3dtv => linalg::top_right_singular_vectors(&g, rank)?,
                SolverMode::Tv3dBaseline => {
                    Array2::from_shape_fn((s, s), |(i, j)| if i == j { 1.0 } else { 0.0 })
                }
            };
            u.push(g.dot(&vn));
            v.push(vn);
        }

        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let state = CsState {
            z,
            x,
            e: Array2::zeros((h * w, s)),
            u: u.try_into().expect("three modes"),
            v: v.try_into().expect("three modes"),
            m: [
                Array2::zeros((h * w, s)),
                Array2::zeros((h * w, s)),
                Array2::zeros((h * w, s)),
            ],
            gamma1: vec![0.0; op.measurements()],
            gamma2: vec![0.0; op.padded_len()],
            mu: cfg.mu0,
        };
        Ok(CsSolver {
            h,
            w,
            s,
            op: op.clone(),
            y: y.to_vec(),
            y_norm,
            cfg: cfg.clone(),
            tx: build_fft_denominator(h, w, s),
            fft: Fft3::new(h, w, s),
            state,
            last_cg_iterations: 0,
        })
    }

    fn mu4(&self) -> f64 {
        self.cfg.mu4_factor * self.state.mu
    }

    fn mode_of(n: usize) -> Mode {
        Mode::ALL[n]
    }

    /// Z-update by CG on `(mu4 Psi* Psi + mu5 I) Z = mu5 (X + E) +
    /// mu4 Psi* y + Psi* Gamma1 - Gamma2`, warm-started from the current
    /// iterate. The operator's spectrum is `{mu5, mu4 + mu5}`, so CG
    /// converges in a handful of steps.
    pub fn solve_z(&mut self) -> Result<()> {
        let mu4 = self.mu4();
        let mu5 = self.state.mu;
        let xe = canonical_from_mat(&(&self.state.x + &self.state.e), self.h, self.w, self.s);
        let mut rhs = self.op.pad(&xe);
        rhs.iter_mut().for_each(|v| *v *= mu5);
        let mut proj = self.op.adjoint(&self.y)?;
        for (r, p) in rhs.iter_mut().zip(&proj) {
            *r += mu4 * p;
        }
        proj = self.op.adjoint(&self.state.gamma1)?;
        for ((r, p), g2) in rhs.iter_mut().zip(&proj).zip(&self.state.gamma2) {
            *r += p - g2;
        }

        let op = &self.op;
        let apply = |v: &[f64]| -> Vec<f64> {
            let meas = op.apply(v).expect("padded length");
            let mut out = op.adjoint(&meas).expect("measurement length");
            for (o, vi) in out.iter_mut().zip(v) {
                *o = mu4 * *o + mu5 * vi;
            }
            out
        };
        let outcome = cg::solve(apply, &rhs, &self.state.z, 1e-8, 500)?;
        self.last_cg_iterations = outcome.iterations;
        self.state.z = outcome.solution;
        Ok(())
    }

    /// X-update: `H_x = mu5 (Z - E) + Gamma2 + sum_n D_n* (mu_n U_n V_n^T
    /// - M_n)` on the truncated domain, solved with weights
    /// `(mu1, mu2, mu3; mu5)`.
    pub fn update_x(&mut self) -> Result<()> {
        let mu = self.state.mu;
        let z_mat = mat_from_canonical(&self.op.truncate(&self.state.z), self.h, self.w, self.s);
        let g2_mat = mat_from_canonical(
            &self.state.gamma2[..self.h * self.w * self.s],
            self.h,
            self.w,
            self.s,
        );
        let mut hx = mu * &(&z_mat - &self.state.e) + &g2_mat;
        for n in 0..3 {
            let uvt = self.state.u[n].dot(&self.state.v[n].t());
            let term = mu * &uvt - &self.state.m[n];
            hx += &diff_adjoint_mat(&term, self.h, self.w, Self::mode_of(n))?;
        }
        let rhs = LinearSystemRhs::new(hx, &self.tx)?;
        let weights = SolveWeights::new([mu, mu, mu], mu)?;
        self.state.x = solve_x_system(&rhs, &weights, &self.fft)?;
        Ok(())
    }

    /// E-update, closed form of the Gaussian noise term:
    /// `E = (mu5 (Z - X) + Gamma2) / (1 + mu5)`.
    pub fn update_e(&mut self) {
        let mu5 = self.state.mu;
        let z_mat = mat_from_canonical(&self.op.truncate(&self.state.z), self.h, self.w, self.s);
        let g2_mat = mat_from_canonical(
            &self.state.gamma2[..self.h * self.w * self.s],
            self.h,
            self.w,
            self.s,
        );
        self.state.e = (mu5 * &(&z_mat - &self.state.x) + &g2_mat) / (1.0 + mu5);
    }

    /// U-update: `U_n = S_{tau/mu_n}((D_n X + M_n/mu_n) V_n)`.
    pub fn update_u(&mut self, n: usize) {
        let mu = self.state.mu;
        let wmat =
            diff_mat(&self.state.x, self.h, self.w, Self::mode_of(n)) + &self.state.m[n] / mu;
        let mut u = match self.cfg.mode {
            SolverMode::Tv3dBaseline => wmat,
            SolverMode::E3dtv => wmat.dot(&self.state.v[n]),
        };
        soft_threshold_in_place(
            u.as_slice_mut().expect("standard layout"),
            self.cfg.tau / mu,
        );
        self.state.u[n] = u;
    }

    /// V-update: Procrustes, as in denoising.
    pub fn update_v(&mut self, n: usize) -> Result<()> {
        if self.cfg.mode == SolverMode::Tv3dBaseline {
            return Ok(());
        }
        if self.state.u[n].iter().all(|&v| v == 0.0) {
            return Ok(());
        }
        let mu = self.state.mu;
        let wmat =
            diff_mat(&self.state.x, self.h, self.w, Self::mode_of(n)) + &self.state.m[n] / mu;
        self.state.v[n] = procrustes_v(&wmat, &self.state.u[n])?;
        Ok(())
    }

    /// Dual ascent on `M_n`, `Gamma1`, `Gamma2` (including the padded
    /// tail of the split constraint), then penalty growth.
    pub fn update_multipliers(&mut self) -> Result<()> {
        let mu = self.state.mu;
        let mu4 = self.mu4();
        for n in 0..3 {
            let resid = self.factor_residual_mat(n);
            self.state.m[n] += &(mu * &resid);
        }
        let meas = self.op.apply(&self.state.z)?;
        for (g1, (yi, mi)) in self.state.gamma1.iter_mut().zip(self.y.iter().zip(&meas)) {
            *g1 += mu4 * (yi - mi);
        }
        let xe = canonical_from_mat(&(&self.state.x + &self.state.e), self.h, self.w, self.s);
        let xe_pad = self.op.pad(&xe);
        for (g2, (zi, xi)) in self
            .state
            .gamma2
            .iter_mut()
            .zip(self.state.z.iter().zip(&xe_pad))
        {
            *g2 += mu * (zi - xi);
        }
        self.state.mu = (mu * self.cfg.mu_growth).min(self.cfg.mu_max);
        Ok(())
    }

    fn factor_residual_mat(&self, n: usize) -> Array2<f64> {
        let g = diff_mat(&self.state.x, self.h, self.w, Self::mode_of(n));
        match self.cfg.mode {
            SolverMode::Tv3dBaseline => g - &self.state.u[n],
            SolverMode::E3dtv => g - self.state.u[n].dot(&self.state.v[n].t()),
        }
    }

    /// Relative residuals: measurement consistency
    /// `||y - Psi Z||_2 / ||y||_2` and the worst factorization residual
    /// `max_n ||D_n X - U_n V_n^T||_F / max(||X||_F, 1e-12)`.
    pub fn residuals(&self) -> Result<(f64, f64)> {
        let meas = self.op.apply(&self.state.z)?;
        let r1 = self
            .y
            .iter()
            .zip(&meas)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / self.y_norm;
        let x_norm = self
            .state
            .x
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(1e-12);
        let r2 = (0..3)
            .map(|n| {
                self.factor_residual_mat(n)
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
                    / x_norm
            })
            .fold(0.0f64, f64::max);
        Ok((r1, r2))
    }

    fn objective(&self) -> f64 {
        let u_l1: f64 = (0..3)
            .map(|n| self.state.u[n].iter().map(|v| v.abs()).sum::<f64>())
            .sum();
        let e_fro2: f64 = self.state.e.iter().map(|v| v * v).sum();
        self.cfg.tau * u_l1 + 0.5 * e_fro2
    }

    /// One full reconstruction iteration; returns the post-update residuals.
    pub fn step(&mut self) -> Result<(f64, f64)> {
        self.solve_z()?;
        self.update_x()?;
        self.update_e();
        for n in 0..3 {
            self.update_u(n);
            self.update_v(n)?;
        }
        self.update_multipliers()?;
        if self.state.x.iter().any(|v| !v.is_finite())
            || self.state.z.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("reconstruction iterate".into()));
        }
        self.residuals()
    }

    pub fn run(&mut self) -> Result<SolverReport> {
        let start = Instant::now();
        let mut report = SolverReport::new();
        for _ in 0..self.cfg.max_iters {
            let (r1, r2) = self.step()?;
            report.iterations += 1;
            report.residual_fit.push(r1);
            report.residual_factor.push(r2);
            report.objective.push(self.objective());
            if r1 <= self.cfg.eps1 && r2 <= self.cfg.eps2 {
                report.converged = true;
                break;
            }
        }
        report.wall_time = start.elapsed();
        Ok(report)
    }

    pub fn z_tensor(&self) -> Result<HsiTensor> {
        let z_mat = mat_from_canonical(&self.op.truncate(&self.state.z), self.h, self.w, self.s);
        HsiTensor::fold3(z_mat, self.h, self.w)
    }

    pub fn x_tensor(&self) -> Result<HsiTensor> {
        HsiTensor::fold3(self.state.x.clone(), self.h, self.w)
    }
}

/// Compressive sampling of a cube: flatten canonically, pad, measure.
pub fn sample(x: &HsiTensor, op: &CompressiveOperator) -> Result<Vec<f64>> {
    if x.dims() != op.dims() {
        return Err(Error::shape(
            format!("{:?}", op.dims()),
            format!("{:?}", x.dims()),
        ));
    }
    op.apply(&x.to_canonical_vec())
}

/// Reconstruct from measurements; returns the signal estimate `Z`, the
/// clean estimate `X`, and the report.
pub fn reconstruct(
    y: &[f64],
    op: &CompressiveOperator,
    cfg: &SolverConfig,
) -> Result<(HsiTensor, HsiTensor, SolverReport)> {
    let mut solver = CsSolver::new(y, op, cfg)?;
    let report = solver.run()?;
    Ok((solver.z_tensor()?, solver.x_tensor()?, report))
}

fn mat_from_canonical(v: &[f64], h: usize, w: usize, s: usize) -> Array2<f64> {
    let hw = h * w;
    debug_assert_eq!(v.len(), hw * s);
    Array2::from_shape_fn((hw, s), |(p, k)| v[p + hw * k])
}

fn canonical_from_mat(m: &Array2<f64>, h: usize, w: usize, s: usize) -> Vec<f64> {
    let hw = h * w;
    let mut out = vec![0.0; hw * s];
    for k in 0..s {
        for p in 0..hw {
            out[p + hw * k] = m[(p, k)];
        }
    }
    out
}
