//! Quality indices: PSNR, SSIM, and ERGAS, evaluated per band on data
//! scaled to `[0, 1]`.

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::HsiTensor;

/// Per-band values plus their mean.
#[derive(Debug, Clone)]
pub struct BandStat {
    pub per_band: Vec<f64>,
    pub mean: f64,
}

impl BandStat {
    fn from_bands(per_band: Vec<f64>) -> Self {
        let mean = per_band.iter().sum::<f64>() / per_band.len() as f64;
        BandStat { per_band, mean }
    }
}

/// Combined quality report. Serializes to CSV with one row per band and
/// a trailing summary row.
#[derive(Debug, Clone)]
pub struct QualityReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub ergas: f64,
    pub band_psnr: Vec<f64>,
    pub band_ssim: Vec<f64>,
}

impl QualityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("band,psnr_db,ssim\n");
        for (k, (p, s)) in self.band_psnr.iter().zip(&self.band_ssim).enumerate() {
            out.push_str(&format!("{},{:.10},{:.10}\n", k, p, s));
        }
        out.push_str(&format!(
            "mean,{:.10},{:.10}\nergas,{:.10},\n",
            self.psnr_db, self.ssim, self.ergas
        ));
        out
    }
}

/// Compute all three indices in one pass.
pub fn quality_report(reference: &HsiTensor, estimate: &HsiTensor) -> Result<QualityReport> {
    let p = psnr(reference, estimate)?;
    let s = ssim(reference, estimate)?;
    let e = ergas(reference, estimate, 1.0)?;
    Ok(QualityReport {
        psnr_db: p.mean,
        ssim: s.mean,
        ergas: e,
        band_psnr: p.per_band,
        band_ssim: s.per_band,
    })
}

fn check_shapes(reference: &HsiTensor, estimate: &HsiTensor) -> Result<()> {
    if reference.dims() != estimate.dims() {
        return Err(Error::shape(
            format!("{:?}", reference.dims()),
            format!("{:?}", estimate.dims()),
        ));
    }
    Ok(())
}

/// PSNR cap for bit-exact bands (MSE = 0).
pub const PSNR_CAP_DB: f64 = 100.0;

/// Per-band PSNR with peak 1.0, capped at 100 dB, plus the band mean.
pub fn psnr(reference: &HsiTensor, estimate: &HsiTensor) -> Result<BandStat> {
    check_shapes(reference, estimate)?;
    let (h, w, s) = reference.dims();
    let r = reference.unfold3();
    let e = estimate.unfold3();
    let per_band = par::map_collect(s, |k| {
        let mut mse = 0.0;
        for p in 0..h * w {
            let d = r[(p, k)] - e[(p, k)];
            mse += d * d;
        }
        mse /= (h * w) as f64;
        if mse == 0.0 {
            PSNR_CAP_DB
        } else {
            (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
        }
    });
    Ok(BandStat::from_bands(per_band))
}

const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Normalized Gaussian window, sigma 1.5, size 11 (shrunk to fit small
/// images, always odd).
fn gaussian_window(size: usize) -> Vec<f64> {
    let sigma = 1.5;
    let half = (size / 2) as f64;
    let mut win: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = win.iter().sum();
    win.iter_mut().for_each(|v| *v /= sum);
    win
}

/// Per-band SSIM (11x11 Gaussian window, C1 = 0.01^2, C2 = 0.03^2 on unit
/// range), averaged over the valid region, plus the band mean.
pub fn ssim(reference: &HsiTensor, estimate: &HsiTensor) -> Result<BandStat> {
    check_shapes(reference, estimate)?;
    let (h, w, s) = reference.dims();
    let mut size = 11.min(h).min(w);
    if size % 2 == 0 {
        size -= 1;
    }
    if size == 0 {
        return Err(Error::invalid("image too small for SSIM"));
    }
    let win = gaussian_window(size);
    let r = reference.unfold3();
    let e = estimate.unfold3();

    let per_band = par::map_collect(s, |k| {
        // Separable filtering would also work; at these sizes the direct
        // windowed sums are clearer.
        let vh = h - size + 1;
        let vw = w - size + 1;
        let mut acc = 0.0;
        for j0 in 0..vw {
            for i0 in 0..vh {
                let mut mx = 0.0;
                let mut my = 0.0;
                let mut mxx = 0.0;
                let mut myy = 0.0;
                let mut mxy = 0.0;
                for dj in 0..size {
                    for di in 0..size {
                        let wgt = win[di] * win[dj];
                        let xv = r[((i0 + di) + (j0 + dj) * h, k)];
                        let yv = e[((i0 + di) + (j0 + dj) * h, k)];
                        mx += wgt * xv;
                        my += wgt * yv;
                        mxx += wgt * xv * xv;
                        myy += wgt * yv * yv;
                        mxy += wgt * xv * yv;
                    }
                }
                let sx = mxx - mx * mx;
                let sy = myy - my * my;
                let sxy = mxy - mx * my;
                let num = (2.0 * mx * my + SSIM_C1) * (2.0 * sxy + SSIM_C2);
                let den = (mx * mx + my * my + SSIM_C1) * (sx + sy + SSIM_C2);
                acc += num / den;
            }
        }
        acc / (vh * vw) as f64
    });
    Ok(BandStat::from_bands(per_band))
}

/// ERGAS: `100 * ratio_scale * sqrt(mean_k (RMSE_k / mean_k)^2)`.
/// Errors when any reference band has zero mean.
pub fn ergas(reference: &HsiTensor, estimate: &HsiTensor, ratio_scale: f64) -> Result<f64> {
    check_shapes(reference, estimate)?;
    if !(ratio_scale.is_finite() && ratio_scale > 0.0) {
        return Err(Error::invalid("ratio_scale must be positive"));
    }
    let (h, w, s) = reference.dims();
    let r = reference.unfold3();
    let e = estimate.unfold3();
    let mut acc = 0.0;
    for k in 0..s {
        let mut mean = 0.0;
        let mut mse = 0.0;
        for p in 0..h * w {
            mean += r[(p, k)];
            let d = r[(p, k)] - e[(p, k)];
            mse += d * d;
        }
        mean /= (h * w) as f64;
        mse /= (h * w) as f64;
        if mean.abs() < 1e-300 {
            return Err(Error::invalid(format!(
                "reference band {k} has zero mean; ERGAS undefined"
            )));
        }
        acc += mse / (mean * mean);
    }
    Ok(100.0 * ratio_scale * (acc / s as f64).sqrt())
}
