//! Minimal deterministic line plots (per-band metric curves) rendered
//! straight into PNG images. No text: series are color-coded and the
//! mapping is documented next to the emitted CSV.

use image::{Rgb, RgbImage};

pub const COLOR_INPUT: Rgb<u8> = Rgb([130, 130, 130]);
pub const COLOR_BASELINE: Rgb<u8> = Rgb([40, 90, 200]);
pub const COLOR_E3DTV: Rgb<u8> = Rgb([200, 40, 40]);

const WIDTH: u32 = 800;
const HEIGHT: u32 = 500;
const MARGIN: u32 = 40;

pub struct Series<'a> {
    pub values: &'a [f64],
    pub color: Rgb<u8>,
}

/// Render one plot: x = index (band), y = metric value, auto-scaled.
pub fn line_plot(series: &[Series]) -> RgbImage {
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, Rgb([255, 255, 255]));
    let axis = Rgb([0, 0, 0]);
    for x in MARGIN..WIDTH - MARGIN {
        img.put_pixel(x, HEIGHT - MARGIN, axis);
    }
    for y in MARGIN..HEIGHT - MARGIN {
        img.put_pixel(MARGIN, y, axis);
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut max_len = 0usize;
    for s in series {
        max_len = max_len.max(s.values.len());
        for &v in s.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || max_len < 2 {
        return img;
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);

    let to_px = |i: usize, v: f64, len: usize| -> (i64, i64) {
        let fx = i as f64 / (len - 1) as f64;
        let fy = (v - lo) / (hi - lo);
        let x = MARGIN as f64 + fx * (WIDTH - 2 * MARGIN) as f64;
        let y = (HEIGHT - MARGIN) as f64 - fy * (HEIGHT - 2 * MARGIN) as f64;
        (x.round() as i64, y.round() as i64)
    };

    for s in series {
        if s.values.len() < 2 {
            continue;
        }
        for i in 0..s.values.len() - 1 {
            let (x0, y0) = to_px(i, s.values[i], s.values.len());
            let (x1, y1) = to_px(i + 1, s.values[i + 1], s.values.len());
            draw_line(&mut img, x0, y0, x1, y1, s.color);
        }
    }
    img
}

fn draw_line(img: &mut RgbImage, mut x0: i64, mut y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x0 >= 0 && y0 >= 0 && (x0 as u32) < WIDTH && (y0 as u32) < HEIGHT {
            img.put_pixel(x0 as u32, y0 as u32, color);
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}
