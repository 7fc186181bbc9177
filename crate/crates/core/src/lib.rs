//! Enhanced 3DTV (E-3DTV) regularization for hyperspectral images.
//!
//! Instead of penalizing the l1 norm of an HSI's three gradient maps
//! directly (3DTV), E-3DTV penalizes the l1 norm of low-rank subspace
//! bases of those maps along the band dimension, which captures the
//! correlated, band-varying sparsity of real gradient maps. The crate
//! provides:
//!
//! - tensor plumbing: mode-3 folding/unfolding, circular difference
//!   operators with exact adjoints, and the FFT-diagonalized solver used
//!   by the ADMM X-updates ([`tensor`], [`fft`]);
//! - the regularizer building blocks: soft thresholding, the orthogonal
//!   Procrustes V-update, 3DTV/E-TV measures and a small-instance
//!   equivalence oracle ([`regularizer`]);
//! - the denoising ADMM solver ([`denoise`]) and the compressed-sensing
//!   solver with its permuted Walsh-Hadamard operator ([`cs`]);
//! - synthetic phantoms, the six structured noise cases, and the PSNR /
//!   SSIM / ERGAS quality indices ([`harness`], [`metrics`]);
//! - binary tensor and measurement file formats ([`io`]).
//!
//! With the default `parallel` feature the data-parallel inner loops run
//! on rayon; disabling it yields a dependency-free sequential build with
//! bitwise-identical results.

pub mod cg;
pub mod cs;
pub mod denoise;
pub mod error;
pub mod fft;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod regularizer;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{HsiTensor, Mode};
