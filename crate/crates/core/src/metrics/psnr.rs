use rayon::prelude::*;

use super::{check_aligned, MetricValue};
use crate::error::Result;
use crate::media::{Frame, VideoClip};

/// Value reported for frames with zero error, and the ceiling for all frames.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Luma PSNR of one frame pair, capped at [`PSNR_CAP_DB`].
pub fn psnr_frame(reference: &Frame, distorted: &Frame) -> f64 {
    let a = reference.luma();
    let b = distorted.luma();
    let sse: u64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return PSNR_CAP_DB;
    }
    let mse = sse as f64 / a.data.len() as f64;
    (10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB)
}

/// Mean of per-frame luma PSNR in dB.
pub fn psnr(reference: &VideoClip, distorted: &VideoClip) -> Result<MetricValue> {
    check_aligned(reference, distorted)?;
    let per_frame: Vec<f64> = reference
        .frames()
        .par_iter()
        .zip(distorted.frames().par_iter())
        .map(|(a, b)| psnr_frame(a, b))
        .collect();
    Ok(MetricValue::mean_of("psnr", per_frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::FrameRate;

    fn clip(values: &[Vec<u8>], w: usize, h: usize) -> VideoClip {
        let frames = values
            .iter()
            .map(|v| Frame::from_luma(w, h, v.clone()).unwrap())
            .collect();
        VideoClip::new(frames, FrameRate::new(30, 1).unwrap(), "t").unwrap()
    }

    #[test]
    fn identical_is_capped() {
        let a = clip(&[vec![7; 16]], 4, 4);
        assert_eq!(psnr(&a, &a).unwrap().value, PSNR_CAP_DB);
    }

    #[test]
    fn constant_offset_of_two() {
        let a = clip(&[vec![16; 64]], 8, 8);
        let b = clip(&[vec![18; 64]], 8, 8);
        let v = psnr(&a, &b).unwrap().value;
        assert!((v - 10.0 * (255.0f64 * 255.0 / 4.0).log10()).abs() < 1e-12);
        assert!((v - 42.1102).abs() < 1e-4);
    }

    #[test]
    fn symmetric() {
        let a = clip(&[(0..16).map(|i| i * 9).collect()], 4, 4);
        let b = clip(&[(0..16).map(|i| 255 - i * 3).collect()], 4, 4);
        assert_eq!(psnr(&a, &b).unwrap().value, psnr(&b, &a).unwrap().value);
    }

    #[test]
    fn mismatch_is_an_error() {
        let a = clip(&[vec![0; 16]], 4, 4);
        let b = clip(&[vec![0; 8]], 4, 2);
        assert!(psnr(&a, &b).is_err());
    }
}
