//! Opponent-channel colorfulness (Hasler and Süsstrunk "M" statistic).

use rayon::prelude::*;

use super::{mean_std, MetricValue};
use crate::media::{Frame, VideoClip};

/// sqrt(s_rg^2 + s_yb^2) + 0.3 * sqrt(m_rg^2 + m_yb^2) with rg = R - G,
/// yb = (R + G)/2 - B, population statistics over the frame.
pub fn frame_colorfulness(frame: &Frame) -> f64 {
    let rgb = frame.to_rgb();
    let (r, g, b) = (&rgb.plane(0).data, &rgb.plane(1).data, &rgb.plane(2).data);
    let mut rg = Vec::with_capacity(r.len());
    let mut yb = Vec::with_capacity(r.len());
    for i in 0..r.len() {
        let (r, g, b) = (f64::from(r[i]), f64::from(g[i]), f64::from(b[i]));
        rg.push(r - g);
        yb.push(0.5 * (r + g) - b);
    }
    let (m_rg, s_rg) = mean_std(&rg);
    let (m_yb, s_yb) = mean_std(&yb);
    (s_rg * s_rg + s_yb * s_yb).sqrt() + 0.3 * (m_rg * m_rg + m_yb * m_yb).sqrt()
}

/// Mean colorfulness over frames.
pub fn colorfulness(clip: &VideoClip) -> MetricValue {
    let per_frame = clip.frames().par_iter().map(frame_colorfulness).collect();
    MetricValue::mean_of("colorfulness", per_frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::PixelFormat;

    #[test]
    fn gray_is_zero() {
        let f = Frame::from_rgb_interleaved(2, 1, &[10, 10, 10, 200, 200, 200]).unwrap();
        assert_eq!(frame_colorfulness(&f), 0.0);
    }

    #[test]
    fn solid_red() {
        let f = Frame::solid(4, 4, PixelFormat::Rgb, [255, 0, 0]).unwrap();
        let expect = 0.3 * (255.0f64 * 255.0 + 127.5 * 127.5).sqrt();
        assert!((frame_colorfulness(&f) - expect).abs() < 1e-9);
        assert!((expect - 85.53).abs() < 0.01);
    }

    #[test]
    fn permutation_invariant() {
        let px: Vec<u8> = (0..48).map(|i| ((i * 53) % 256) as u8).collect();
        let a = Frame::from_rgb_interleaved(4, 4, &px).unwrap();
        let rev: Vec<u8> = px.chunks(3).rev().flatten().copied().collect();
        let b = Frame::from_rgb_interleaved(4, 4, &rev).unwrap();
        assert!((frame_colorfulness(&a) - frame_colorfulness(&b)).abs() < 1e-9);
    }
}
