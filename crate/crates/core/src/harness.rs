//! Synthetic phantoms and the six structured noise cases used by the
//! experimental protocol.
//!
//! All randomness flows from explicit seeds through ChaCha8, so every
//! operation is a pure function of (inputs, seed) on every platform.

use crate::error::{Error, Result};
use crate::tensor::HsiTensor;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent noise components of a compound case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseComponent {
    BandParams,
    Gaussian,
    Impulse,
    Deadline,
    Stripe,
}

/// Deterministic per-component sub-seed, shared with the composition
/// tests so compound cases can be rebuilt from their parts bit for bit.
pub fn component_seed(seed: u64, component: NoiseComponent) -> u64 {
    let tag = match component {
        NoiseComponent::BandParams => 1,
        NoiseComponent::Gaussian => 2,
        NoiseComponent::Impulse => 3,
        NoiseComponent::Deadline => 4,
        NoiseComponent::Stripe => 5,
    };
    splitmix64(seed ^ splitmix64(tag))
}

/// Random low-rank smooth phantom: `X = A B^T` with piecewise-smooth
/// spatial columns (box-blurred random rectangles) and smooth positive
/// spectral columns, globally rescaled into `[0, 1]`.
pub fn gen_phantom(
    h: usize,
    w: usize,
    s: usize,
    rank: usize,
    smoothness: f64,
    seed: u64,
) -> Result<HsiTensor> {
    if h == 0 || w == 0 || s == 0 {
        return Err(Error::invalid("phantom dimensions must be positive"));
    }
    if rank == 0 || rank > s.min(h * w) {
        return Err(Error::invalid(format!(
            "phantom rank must lie in 1..=min(hw, s), got {rank}"
        )));
    }
    if !(smoothness.is_finite() && smoothness >= 0.0) {
        return Err(Error::invalid("smoothness must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blur_rounds = smoothness.round() as usize;

    // Spatial basis: per column, a handful of random rectangles blurred
    // into piecewise-smooth blobs. Everything stays non-negative so the
    // global rescale is a pure scaling and preserves the rank.
    let mut a = Array2::<f64>::zeros((h * w, rank));
    for col in 0..rank {
        let mut img = vec![0.0f64; h * w];
        let n_blobs = rng.random_range(3..=6);
        for _ in 0..n_blobs {
            let ci = rng.random_range(0..h);
            let cj = rng.random_range(0..w);
            let ri = rng.random_range(1..=(h / 3).max(1));
            let rj = rng.random_range(1..=(w / 3).max(1));
            let amp: f64 = rng.random_range(0.2..1.0);
            for i in ci.saturating_sub(ri)..(ci + ri + 1).min(h) {
                for j in cj.saturating_sub(rj)..(cj + rj + 1).min(w) {
                    img[i + j * h] += amp;
                }
            }
        }
        for _ in 0..blur_rounds {
            img = box_blur(&img, h, w);
        }
        for p in 0..h * w {
            a[(p, col)] = img[p];
        }
    }

    // Spectral basis: positive moving-average-smoothed random curves.
    let mut b = Array2::<f64>::zeros((s, rank));
    let window = (s / 4).max(1);
    for col in 0..rank {
        let raw: Vec<f64> = (0..s).map(|_| rng.random_range(0.0..1.0)).collect();
        for k in 0..s {
            let lo = k.saturating_sub(window);
            let hi = (k + window + 1).min(s);
            let mean = raw[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            b[(k, col)] = 0.3 + mean;
        }
    }

    let x = a.dot(&b.t());
    let max = x.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(Error::Numerical("degenerate phantom (all zero)".into()));
    }
    HsiTensor::fold3(x / max, h, w)
}

fn box_blur(img: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for j in 0..w {
        for i in 0..h {
            let mut acc = 0.0;
            let mut count = 0.0;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let ii = i as i64 + di;
                    let jj = j as i64 + dj;
                    if ii >= 0 && ii < h as i64 && jj >= 0 && jj < w as i64 {
                        acc += img[ii as usize + jj as usize * h];
                        count += 1.0;
                    }
                }
            }
            out[i + j * h] = acc / count;
        }
    }
    out
}

/// The six compound noise cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseCase {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl NoiseCase {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(NoiseCase::A),
            "b" => Ok(NoiseCase::B),
            "c" => Ok(NoiseCase::C),
            "d" => Ok(NoiseCase::D),
            "e" => Ok(NoiseCase::E),
            "f" => Ok(NoiseCase::F),
            other => Err(Error::invalid(format!("unknown noise case '{other}'"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NoiseCase::A => "a",
            NoiseCase::B => "b",
            NoiseCase::C => "c",
            NoiseCase::D => "d",
            NoiseCase::E => "e",
            NoiseCase::F => "f",
        }
    }

    pub const ALL: [NoiseCase; 6] = [
        NoiseCase::A,
        NoiseCase::B,
        NoiseCase::C,
        NoiseCase::D,
        NoiseCase::E,
        NoiseCase::F,
    ];
}

/// Full specification of one noise run.
///
/// The literature labels values like 0.1 as "variance"; they are treated
/// as standard deviations by default, with `strict_variance` switching to
/// the literal reading (`sigma = sqrt(value)`).
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub case: NoiseCase,
    pub gaussian_sigma: f64,
    /// Per-band sigma range for cases e/f.
    pub sigma_range: (f64, f64),
    pub impulse_ratio: f64,
    /// Per-band impulse-ratio range for cases e/f.
    pub impulse_range: (f64, f64),
    /// Inclusive zero-based band range receiving deadlines.
    pub deadline_bands: (usize, usize),
    /// Inclusive zero-based band range receiving stripes.
    pub stripe_bands: (usize, usize),
    pub seed: u64,
    pub strict_variance: bool,
}

impl NoiseSpec {
    /// Protocol defaults for `s` bands. The reference band ranges
    /// (deadlines on 91..=130, stripes on 161..=190 of 224 bands) scale
    /// proportionally to `s`.
    pub fn for_case(case: NoiseCase, s: usize, seed: u64) -> Self {
        let scale = |band: usize| ((band * s) / 224).min(s.saturating_sub(1));
        let gaussian_sigma = match case {
            NoiseCase::A | NoiseCase::B => 0.1,
            NoiseCase::C | NoiseCase::D => 0.075,
            _ => 0.0,
        };
        let impulse_ratio = match case {
            NoiseCase::C | NoiseCase::D => 0.15,
            _ => 0.0,
        };
        NoiseSpec {
            case,
            gaussian_sigma,
            sigma_range: (0.0, 0.2),
            impulse_ratio,
            impulse_range: (0.0, 0.2),
            deadline_bands: (scale(91), scale(130)),
            stripe_bands: (scale(161), scale(190)),
            seed,
            strict_variance: false,
        }
    }

    fn validate(&self, s: usize) -> Result<()> {
        let ratio_ok = |r: f64| (0.0..=1.0).contains(&r);
        if !ratio_ok(self.impulse_ratio)
            || !ratio_ok(self.impulse_range.0)
            || !ratio_ok(self.impulse_range.1)
            || self.impulse_range.0 > self.impulse_range.1
        {
            return Err(Error::invalid("impulse ratios must lie in [0, 1]"));
        }
        if self.gaussian_sigma < 0.0
            || self.sigma_range.0 < 0.0
            || self.sigma_range.0 > self.sigma_range.1
        {
            return Err(Error::invalid("gaussian sigma must be non-negative"));
        }
        let band_ok = |r: (usize, usize)| r.0 <= r.1 && r.1 < s;
        let needs_deadlines = matches!(
            self.case,
            NoiseCase::B | NoiseCase::D | NoiseCase::E | NoiseCase::F
        );
        if needs_deadlines && !band_ok(self.deadline_bands) {
            return Err(Error::invalid(format!(
                "deadline band range {:?} outside 0..{s}",
                self.deadline_bands
            )));
        }
        if self.case == NoiseCase::F && !band_ok(self.stripe_bands) {
            return Err(Error::invalid(format!(
                "stripe band range {:?} outside 0..{s}",
                self.stripe_bands
            )));
        }
        Ok(())
    }

    fn effective_sigma(&self, value: f64) -> f64 {
        if self.strict_variance {
            value.sqrt()
        } else {
            value
        }
    }
}

/// Add zero-mean Gaussian noise with one sigma per band.
pub fn add_gaussian(x: &HsiTensor, sigma_per_band: &[f64], seed: u64) -> Result<HsiTensor> {
    let (h, w, s) = x.dims();
    if sigma_per_band.len() != s {
        return Err(Error::shape(
            format!("{s} sigmas"),
            format!("{}", sigma_per_band.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = x.unfold3().clone();
    for (k, &sigma) in sigma_per_band.iter().enumerate() {
        if sigma == 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| Error::invalid(format!("bad sigma {sigma}: {e}")))?;
        for p in 0..h * w {
            out[(p, k)] += normal.sample(&mut rng);
        }
    }
    HsiTensor::fold3(out, h, w)
}

/// Salt-and-pepper impulse noise: each voxel is replaced by 0 or 1 (equal
/// odds) with the band's probability.
pub fn add_impulse(x: &HsiTensor, ratio_per_band: &[f64], seed: u64) -> Result<HsiTensor> {
    let (h, w, s) = x.dims();
    if ratio_per_band.len() != s {
        return Err(Error::shape(
            format!("{s} ratios"),
            format!("{}", ratio_per_band.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = x.unfold3().clone();
    for (k, &ratio) in ratio_per_band.iter().enumerate() {
        if ratio == 0.0 {
            continue;
        }
        for p in 0..h * w {
            if rng.random::<f64>() < ratio {
                out[(p, k)] = if rng.random::<bool>() { 1.0 } else { 0.0 };
            }
        }
    }
    HsiTensor::fold3(out, h, w)
}

/// Deadlines: zero-valued full-height column segments, 3..=10 per band,
/// widths 1..=3, on the inclusive band range.
pub fn add_deadlines(x: &HsiTensor, bands: (usize, usize), seed: u64) -> Result<HsiTensor> {
    let (h, w, s) = x.dims();
    if bands.0 > bands.1 || bands.1 >= s {
        return Err(Error::invalid(format!(
            "deadline band range {bands:?} outside 0..{s}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = x.unfold3().clone();
    for k in bands.0..=bands.1 {
        let count = rng.random_range(3..=10usize);
        for _ in 0..count {
            let j0 = rng.random_range(0..w);
            let width = rng.random_range(1..=3usize);
            for j in j0..(j0 + width).min(w) {
                for i in 0..h {
                    out[(i + j * h, k)] = 0.0;
                }
            }
        }
    }
    HsiTensor::fold3(out, h, w)
}

/// Stripes: additive constant full-width rows of amplitude +-0.2,
/// 20..=40 per band, on the inclusive band range.
pub fn add_stripes(x: &HsiTensor, bands: (usize, usize), seed: u64) -> Result<HsiTensor> {
    let (h, w, s) = x.dims();
    if bands.0 > bands.1 || bands.1 >= s {
        return Err(Error::invalid(format!(
            "stripe band range {bands:?} outside 0..{s}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = x.unfold3().clone();
    for k in bands.0..=bands.1 {
        let count = rng.random_range(20..=40usize);
        for _ in 0..count {
            let i = rng.random_range(0..h);
            let amp = if rng.random::<bool>() { 0.2 } else { -0.2 };
            for j in 0..w {
                out[(i + j * h, k)] += amp;
            }
        }
    }
    HsiTensor::fold3(out, h, w)
}

/// Apply one of the six compound noise cases. The input must lie in
/// `[0, 1]`; the output is deliberately not clipped.
pub fn apply_noise(x: &HsiTensor, spec: &NoiseSpec) -> Result<HsiTensor> {
    let (_, _, s) = x.dims();
    spec.validate(s)?;
    if x.unfold3()
        .iter()
        .any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v))
    {
        return Err(Error::invalid("noise input must be scaled to [0, 1]"));
    }

    // Per-band parameters for cases e/f are drawn up front from their own
    // stream so the component seeds stay independent of them.
    let (sigmas, ratios): (Vec<f64>, Vec<f64>) = match spec.case {
        NoiseCase::A | NoiseCase::B => (
            vec![spec.effective_sigma(spec.gaussian_sigma); s],
            vec![0.0; s],
        ),
        NoiseCase::C | NoiseCase::D => (
            vec![spec.effective_sigma(spec.gaussian_sigma); s],
            vec![spec.impulse_ratio; s],
        ),
        NoiseCase::E | NoiseCase::F => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(component_seed(spec.seed, NoiseComponent::BandParams));
            let sigmas = (0..s)
                .map(|_| {
                    spec.effective_sigma(rng.random_range(spec.sigma_range.0..=spec.sigma_range.1))
                })
                .collect();
            let ratios = (0..s)
                .map(|_| rng.random_range(spec.impulse_range.0..=spec.impulse_range.1))
                .collect();
            (sigmas, ratios)
        }
    };

    let mut out = add_gaussian(
        x,
        &sigmas,
        component_seed(spec.seed, NoiseComponent::Gaussian),
    )?;
    if ratios.iter().any(|&r| r > 0.0) {
        out = add_impulse(
            &out,
            &ratios,
            component_seed(spec.seed, NoiseComponent::Impulse),
        )?;
    }
    if matches!(
        spec.case,
        NoiseCase::B | NoiseCase::D | NoiseCase::E | NoiseCase::F
    ) {
        out = add_deadlines(
            &out,
            spec.deadline_bands,
            component_seed(spec.seed, NoiseComponent::Deadline),
        )?;
    }
    if spec.case == NoiseCase::F {
        out = add_stripes(
            &out,
            spec.stripe_bands,
            component_seed(spec.seed, NoiseComponent::Stripe),
        )?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizer::tv3d_measure;

    #[test]
    fn phantom_rank1_is_numerically_rank1() {
        let p = gen_phantom(12, 10, 8, 1, 2.0, 7).unwrap();
        let (_, sigma, _) = crate::linalg::svd_thin(p.unfold3()).unwrap();
        assert!(
            sigma[1] / sigma[0] <= 1e-10,
            "sigma ratio {}",
            sigma[1] / sigma[0]
        );
    }

    #[test]
    fn phantom_values_in_unit_interval() {
        let p = gen_phantom(16, 16, 12, 3, 2.0, 3).unwrap();
        assert!(p.unfold3().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(p.unfold3().iter().any(|&v| v > 0.9)); // rescale hits the max
    }

    #[test]
    fn phantom_is_smoother_than_iid_uniform() {
        let p = gen_phantom(16, 16, 8, 3, 2.0, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let iid = HsiTensor::from_fn(16, 16, 8, |_, _, _| rng.random_range(0.0..1.0)).unwrap();
        assert!(tv3d_measure(&p) < tv3d_measure(&iid));
    }

    #[test]
    fn phantom_determinism_and_validation() {
        let a = gen_phantom(8, 8, 6, 2, 1.0, 5).unwrap();
        let b = gen_phantom(8, 8, 6, 2, 1.0, 5).unwrap();
        assert_eq!(a, b);
        assert!(gen_phantom(8, 8, 6, 0, 1.0, 5).is_err());
        assert!(gen_phantom(8, 8, 6, 7, 1.0, 5).is_err());
    }

    #[test]
    fn case_a_empirical_sigma() {
        let x = gen_phantom(64, 64, 8, 2, 2.0, 1).unwrap();
        let spec = NoiseSpec::for_case(NoiseCase::A, 8, 99);
        let noisy = apply_noise(&x, &spec).unwrap();
        let diffs: Vec<f64> = noisy
            .unfold3()
            .iter()
            .zip(x.unfold3().iter())
            .map(|(n, c)| n - c)
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / diffs.len() as f64;
        let sigma = var.sqrt();
        assert!((0.097..=0.103).contains(&sigma), "empirical sigma {sigma}");
    }

    #[test]
    fn zero_noise_is_identity() {
        let x = gen_phantom(8, 8, 6, 2, 1.0, 2).unwrap();
        let mut spec = NoiseSpec::for_case(NoiseCase::A, 6, 0);
        spec.gaussian_sigma = 0.0;
        let out = apply_noise(&x, &spec).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn case_c_impulse_fraction() {
        let x = gen_phantom(64, 64, 8, 2, 2.0, 4).unwrap();
        let spec = NoiseSpec::for_case(NoiseCase::C, 8, 123);
        let noisy = apply_noise(&x, &spec).unwrap();
        let extremes = noisy
            .unfold3()
            .iter()
            .filter(|&&v| v == 0.0 || v == 1.0)
            .count();
        let frac = extremes as f64 / noisy.len() as f64;
        assert!((0.145..=0.155).contains(&frac), "impulse fraction {frac}");
    }

    #[test]
    fn case_d_composes_case_c_and_deadlines() {
        let x = gen_phantom(16, 16, 10, 2, 2.0, 8).unwrap();
        let seed = 321;
        let spec_d = {
            let mut s = NoiseSpec::for_case(NoiseCase::D, 10, seed);
            s.deadline_bands = (3, 6);
            s
        };
        let direct = apply_noise(&x, &spec_d).unwrap();

        let s = 10;
        let sigmas = vec![0.075; s];
        let ratios = vec![0.15; s];
        let step1 =
            add_gaussian(&x, &sigmas, component_seed(seed, NoiseComponent::Gaussian)).unwrap();
        let step2 = add_impulse(
            &step1,
            &ratios,
            component_seed(seed, NoiseComponent::Impulse),
        )
        .unwrap();
        let step3 = add_deadlines(
            &step2,
            (3, 6),
            component_seed(seed, NoiseComponent::Deadline),
        )
        .unwrap();
        assert_eq!(direct, step3);
    }

    #[test]
    fn rejects_out_of_range_input_and_bad_bands() {
        let x = HsiTensor::from_fn(4, 4, 4, |_, _, _| 2.0).unwrap();
        let spec = NoiseSpec::for_case(NoiseCase::A, 4, 0);
        assert!(apply_noise(&x, &spec).is_err());

        let ok = gen_phantom(4, 4, 4, 2, 1.0, 0).unwrap();
        let mut bad = NoiseSpec::for_case(NoiseCase::B, 4, 0);
        bad.deadline_bands = (2, 9);
        assert!(apply_noise(&ok, &bad).is_err());
    }

    #[test]
    fn deadlines_zero_full_columns() {
        let x = HsiTensor::from_fn(6, 6, 4, |_, _, _| 0.5).unwrap();
        let out = add_deadlines(&x, (1, 2), 77).unwrap();
        for k in [1usize, 2] {
            let mut zero_cols = 0;
            for j in 0..6 {
                let col_zero = (0..6).all(|i| out.get(i, j, k) == 0.0);
                if col_zero {
                    zero_cols += 1;
                }
                // A column is either untouched or fully zeroed.
                let col_untouched = (0..6).all(|i| out.get(i, j, k) == 0.5);
                assert!(col_zero || col_untouched);
            }
            assert!(zero_cols >= 1);
        }
        // Bands outside the range untouched.
        for k in [0usize, 3] {
            assert!((0..6).all(|j| (0..6).all(|i| out.get(i, j, k) == 0.5)));
        }
    }

    #[test]
    fn stripes_add_constant_rows() {
        let x = HsiTensor::from_fn(32, 8, 3, |_, _, _| 0.5).unwrap();
        let out = add_stripes(&x, (1, 1), 13).unwrap();
        for i in 0..32 {
            let vals: Vec<f64> = (0..8).map(|j| out.get(i, j, 1)).collect();
            assert!(vals.iter().all(|&v| (v - vals[0]).abs() < 1e-15));
            let delta = vals[0] - 0.5;
            // Rows carry an integer multiple of +-0.2.
            let steps = delta / 0.2;
            assert!(
                (steps - steps.round()).abs() < 1e-9,
                "row {i}: delta {delta}"
            );
        }
    }
}
