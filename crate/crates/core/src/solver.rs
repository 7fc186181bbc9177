//! Shared solver configuration and per-run diagnostics.

use crate::error::{Error, Result};
use std::time::Duration;

/// Which regularizer the solvers apply.
///
/// `Tv3dBaseline` is the degenerate configuration: rank pinned to `s`,
/// every `V_n` pinned to the identity and never updated, so the U-update
/// reduces to the plain 3DTV prox `S_{tau/mu}(D_n X + M_n/mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMode {
    #[default]
    E3dtv,
    Tv3dBaseline,
}

/// Tunables shared by the denoising and compressed-sensing solvers.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Sparsity weight on the basis maps `U_n` (threshold `tau/mu`).
    pub tau: f64,
    /// Weight on the l1 noise term (denoising only; threshold `lambda/mu`).
    pub lambda: f64,
    /// Subspace rank `r` (ignored in baseline mode, where it is `s`).
    pub rank: usize,
    /// Initial penalty parameter.
    pub mu0: f64,
    /// Per-iteration growth factor of the penalty (>= 1).
    pub mu_growth: f64,
    /// Penalty cap.
    pub mu_max: f64,
    /// Data-fit residual tolerance.
    pub eps1: f64,
    /// Gradient-factorization residual tolerance.
    pub eps2: f64,
    /// Iteration cap.
    pub max_iters: usize,
    /// Measurement-term penalty multiplier for compressed sensing:
    /// `mu4 = mu4_factor * mu`.
    pub mu4_factor: f64,
    pub mode: SolverMode,
}

impl SolverConfig {
    /// Defaults for an `h x w x s` problem: `lambda = 1/sqrt(hw)`,
    /// `tau = c_tau * sqrt(hw)`.
    pub fn for_dims(h: usize, w: usize, c_tau: f64, rank: usize) -> Self {
        let hw = (h * w) as f64;
        SolverConfig {
            tau: c_tau * hw.sqrt(),
            lambda: 1.0 / hw.sqrt(),
            rank,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self, s: usize) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.mode == SolverMode::E3dtv && (self.rank == 0 || self.rank >= s) {
            return Err(Error::invalid(format!(
                "rank must satisfy 1 <= rank < s = {s}, got {}",
                self.rank
            )));
        }
        if !(self.mu0.is_finite() && self.mu0 > 0.0) {
            return Err(Error::invalid(format!(
                "mu0 must be positive, got {}",
                self.mu0
            )));
        }
        if !(self.mu_growth.is_finite() && self.mu_growth >= 1.0) {
            return Err(Error::invalid(format!(
                "mu_growth must be >= 1, got {}",
                self.mu_growth
            )));
        }
        if !(self.mu_max.is_finite() && self.mu_max >= self.mu0) {
            return Err(Error::invalid(format!(
                "mu_max must be >= mu0, got {}",
                self.mu_max
            )));
        }
        if !(self.eps1 > 0.0 && self.eps2 > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if !(self.mu4_factor.is_finite() && self.mu4_factor > 0.0) {
            return Err(Error::invalid(format!(
                "mu4_factor must be positive, got {}",
                self.mu4_factor
            )));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau: 1.0,
            lambda: 1.0,
            rank: 3,
            mu0: 1e-2,
            mu_growth: 1.05,
            mu_max: 1e6,
            eps1: 1e-6,
            eps2: 1e-6,
            max_iters: 200,
            mu4_factor: 10.0,
            mode: SolverMode::E3dtv,
        }
    }
}

/// Per-run diagnostics: one entry of each history per iteration.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub iterations: usize,
    pub converged: bool,
    /// Data-fit feasibility residual per iteration.
    pub residual_fit: Vec<f64>,
    /// Worst gradient-factorization residual per iteration.
    pub residual_factor: Vec<f64>,
    pub objective: Vec<f64>,
    pub wall_time: Duration,
}

impl SolverReport {
    pub fn new() -> Self {
        SolverReport {
            iterations: 0,
            converged: false,
            residual_fit: Vec::new(),
            residual_factor: Vec::new(),
            objective: Vec::new(),
            wall_time: Duration::ZERO,
        }
    }

    /// CSV with one row per iteration. Wall time is intentionally not
    /// serialized so equal runs produce byte-identical reports.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,residual_fit,residual_factor,objective\n");
        for i in 0..self.iterations {
            out.push_str(&format!(
                "{},{:.15e},{:.15e},{:.15e}\n",
                i + 1,
                self.residual_fit[i],
                self.residual_factor[i],
                self.objective[i]
            ));
        }
        out
    }
}

impl Default for SolverReport {
    fn default() -> Self {
        Self::new()
    }
}
