//! Spatial and temporal information.
//!
//! SI: standard deviation of the Sobel gradient magnitude of luma, over
//! interior pixels (the one-pixel border has no full 3x3 neighbourhood).
//! TI: standard deviation of the luma difference between consecutive frames.
//! Both use population standard deviation, pooled over frames (max by default).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_std, Pooling};
use crate::media::{Plane, VideoClip};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiTi {
    pub si: f64,
    pub ti: f64,
    /// False for single-frame clips, where TI is reported as 0.
    pub ti_defined: bool,
    pub pooling: Pooling,
}

/// Sobel gradient magnitudes for pixels with a full 3x3 neighbourhood, row-major.
pub fn sobel_magnitude_interior(p: &Plane) -> Vec<f64> {
    if p.width < 3 || p.height < 3 {
        return Vec::new();
    }
    let v = |x: usize, y: usize| f64::from(p.get(x, y));
    let mut out = Vec::with_capacity((p.width - 2) * (p.height - 2));
    for y in 1..p.height - 1 {
        for x in 1..p.width - 1 {
            let gx = (v(x + 1, y - 1) + 2.0 * v(x + 1, y) + v(x + 1, y + 1))
                - (v(x - 1, y - 1) + 2.0 * v(x - 1, y) + v(x - 1, y + 1));
            let gy = (v(x - 1, y + 1) + 2.0 * v(x, y + 1) + v(x + 1, y + 1))
                - (v(x - 1, y - 1) + 2.0 * v(x, y - 1) + v(x + 1, y - 1));
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

fn frame_si(luma: &Plane) -> f64 {
    let mags = sobel_magnitude_interior(luma);
    if mags.is_empty() {
        0.0
    } else {
        mean_std(&mags).1
    }
}

fn frame_ti(prev: &Plane, cur: &Plane) -> f64 {
    let diff: Vec<f64> = cur
        .data
        .iter()
        .zip(&prev.data)
        .map(|(&a, &b)| f64::from(a) - f64::from(b))
        .collect();
    mean_std(&diff).1
}

pub fn si_ti_with_pooling(clip: &VideoClip, pooling: Pooling) -> SiTi {
    let lumas: Vec<Plane> = clip.frames().par_iter().map(|f| f.luma()).collect();
    let si_frames: Vec<f64> = lumas.par_iter().map(frame_si).collect();
    let ti_frames: Vec<f64> = lumas.par_windows(2).map(|w| frame_ti(&w[0], &w[1])).collect();
    let ti_defined = !ti_frames.is_empty();
    if !ti_defined {
        log::warn!("TI undefined for single-frame clip `{}`; reporting 0", clip.source_id);
    }
    SiTi {
        si: pooling.pool(&si_frames),
        ti: if ti_defined { pooling.pool(&ti_frames) } else { 0.0 },
        ti_defined,
        pooling,
    }
}

/// SI/TI with max pooling over frames.
pub fn si_ti(clip: &VideoClip) -> SiTi {
    si_ti_with_pooling(clip, Pooling::Max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{Frame, FrameRate};

    fn clip_of(frames: Vec<Vec<u8>>, w: usize, h: usize) -> VideoClip {
        let frames = frames
            .into_iter()
            .map(|l| Frame::from_luma(w, h, l).unwrap())
            .collect();
        VideoClip::new(frames, FrameRate::new(30, 1).unwrap(), "t").unwrap()
    }

    #[test]
    fn constant_static_clip_is_zero() {
        let r = si_ti(&clip_of(vec![vec![90; 25]; 3], 5, 5));
        assert_eq!((r.si, r.ti), (0.0, 0.0));
        assert!(r.ti_defined);
    }

    #[test]
    fn static_textured_clip_has_no_ti() {
        let tex: Vec<u8> = (0..36).map(|i| ((i * 37) % 251) as u8).collect();
        let r = si_ti(&clip_of(vec![tex.clone(), tex], 6, 6));
        assert_eq!(r.ti, 0.0);
        assert!(r.si > 0.0);
    }

    #[test]
    fn single_frame_flags_ti() {
        let r = si_ti(&clip_of(vec![vec![1; 9]], 3, 3));
        assert!(!r.ti_defined);
        assert_eq!(r.ti, 0.0);
    }

    #[test]
    fn hand_computed_4x4() {
        // frame 0: columns 0,0,10,10 ; frame 1: frame 0 + 2 on the right half
        let f0 = vec![0, 0, 10, 10, 0, 0, 10, 10, 0, 0, 10, 10, 0, 0, 10, 10];
        let f1 = vec![0, 0, 12, 12, 0, 0, 12, 12, 0, 0, 12, 12, 0, 0, 12, 12];
        let r = si_ti(&clip_of(vec![f0, f1], 4, 4));
        // interior gx = 4*10 = 40 for frame 0 and 48 for frame 1 everywhere; gy = 0
        // -> constant magnitude, SI = 0
        assert_eq!(r.si, 0.0);
        // diff = 0 on 8 pixels and 2 on 8 pixels -> population std 1
        assert!((r.ti - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_pooling_option() {
        let a: Vec<u8> = (0..25).map(|i| (i * 10) as u8).collect();
        let b = vec![0u8; 25];
        let clip = clip_of(vec![a, b], 5, 5);
        let max = si_ti_with_pooling(&clip, Pooling::Max);
        let mean = si_ti_with_pooling(&clip, Pooling::Mean);
        assert!((mean.si - max.si / 2.0).abs() < 1e-12);
    }
}
