//! Multi-scale SSIM on luma.
//!
//! 11x11 Gaussian window (sigma 1.5), valid-region filtering, 2x2 mean-pool
//! between scales. Negative per-scale components are clamped to zero before
//! exponentiation so the product stays real.

use rayon::prelude::*;

use super::{check_aligned, MetricValue};
use crate::error::{Error, Result};
use crate::media::{Frame, VideoClip};

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

struct Image {
    w: usize,
    h: usize,
    px: Vec<f64>,
}

impl Image {
    fn downsample(&self) -> Image {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.w + 2 * x;
                px.push((self.px[i] + self.px[i + 1] + self.px[i + self.w] + self.px[i + self.w + 1]) / 4.0);
            }
        }
        Image { w, h, px }
    }
}

fn gaussian_taps() -> [f64; WINDOW] {
    let mut taps = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - c;
        *t = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable valid-region Gaussian filter.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64; WINDOW]) -> (usize, usize, Vec<f64>) {
    let (ow, oh) = (w + 1 - WINDOW, h + 1 - WINDOW);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let row = &src[y * w + x..y * w + x + WINDOW];
            tmp[y * ow + x] = row.iter().zip(taps).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += tmp[(y + k) * ow + x] * t;
            }
            out[y * ow + x] = acc;
        }
    }
    (ow, oh, out)
}

/// Mean luminance term and mean contrast-structure term at one scale.
fn ssim_components(a: &Image, b: &Image, taps: &[f64; WINDOW]) -> (f64, f64) {
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        a.px.iter().zip(&b.px).map(|(&x, &y)| f(x, y)).collect()
    };
    let (ow, oh, mu_a) = filter_valid(&a.px, a.w, a.h, taps);
    let (_, _, mu_b) = filter_valid(&b.px, b.w, b.h, taps);
    let (_, _, aa) = filter_valid(&prod(&|x, _| x * x), a.w, a.h, taps);
    let (_, _, bb) = filter_valid(&prod(&|_, y| y * y), a.w, a.h, taps);
    let (_, _, ab) = filter_valid(&prod(&|x, y| x * y), a.w, a.h, taps);

    let mut l_sum = 0.0;
    let mut cs_sum = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        l_sum += (2.0 * ma * mb + C1) / (ma * ma + mb * mb + C1);
        cs_sum += (2.0 * cov + C2) / (va + vb + C2);
    }
    let n = (ow * oh) as f64;
    (l_sum / n, cs_sum / n)
}

/// Number of scales that keep every scale at least one window wide.
pub(crate) fn scale_count(width: usize, height: usize) -> usize {
    let mut d = width.min(height);
    let mut n = 0;
    while n < MS_SSIM_WEIGHTS.len() && d >= WINDOW {
        n += 1;
        d /= 2;
    }
    n
}

/// MS-SSIM of one frame pair.
pub fn ms_ssim_frame(reference: &Frame, distorted: &Frame) -> Result<f64> {
    if reference.width() != distorted.width() || reference.height() != distorted.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            distorted.width(),
            distorted.height()
        )));
    }
    let scales = scale_count(reference.width(), reference.height());
    if scales == 0 {
        return Err(Error::InvalidParameter(format!(
            "MS-SSIM needs frames of at least {WINDOW}x{WINDOW}, got {}x{}",
            reference.width(),
            reference.height()
        )));
    }
    let weight_sum: f64 = MS_SSIM_WEIGHTS[..scales].iter().sum();
    let taps = gaussian_taps();

    let to_image = |f: &Frame| Image {
        w: f.width(),
        h: f.height(),
        px: f.luma().to_f64(),
    };
    let mut a = to_image(reference);
    let mut b = to_image(distorted);
    let mut score = 1.0;
    for s in 0..scales {
        let (l, cs) = ssim_components(&a, &b, &taps);
        let weight = MS_SSIM_WEIGHTS[s] / weight_sum;
        let term = if s + 1 == scales { l * cs } else { cs };
        score *= term.max(0.0).powf(weight);
        if s + 1 < scales {
            a = a.downsample();
            b = b.downsample();
        }
    }
    Ok(score)
}

/// Mean of per-frame MS-SSIM.
pub fn ms_ssim(reference: &VideoClip, distorted: &VideoClip) -> Result<MetricValue> {
    check_aligned(reference, distorted)?;
    let per_frame = reference
        .frames()
        .par_iter()
        .zip(distorted.frames().par_iter())
        .map(|(a, b)| ms_ssim_frame(a, b))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MetricValue::mean_of("ms_ssim", per_frame))
}
