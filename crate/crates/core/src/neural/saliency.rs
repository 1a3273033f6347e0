//! Clip-level saliency maps and salient-crop placement.

use serde::{Deserialize, Serialize};

use super::{process, Backend, ProviderHandle, ProviderKind};
use crate::error::{Error, Result};
use crate::media::{Region, VideoClip};

/// Blur width relative to frame height.
pub const BLUR_SIGMA_FRACTION: f64 = 0.05;

/// Nonnegative per-pixel weights summing to 1, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub width: usize,
    pub height: usize,
    pub weights: Vec<f64>,
}

impl SaliencyMap {
    pub fn uniform(width: usize, height: usize) -> Self {
        let n = width * height;
        SaliencyMap {
            width,
            height,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Normalize raw nonnegative weights to unit sum.
    pub fn from_weights(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != width * height || weights.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} saliency weights for a {width}x{height} map",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("saliency weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            log::warn!("all-zero saliency map; falling back to uniform");
            return Ok(SaliencyMap::uniform(width, height));
        }
        Ok(SaliencyMap {
            width,
            height,
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.weights[y * self.width + x]
    }

    /// Location of the largest weight. Ties go to the pixel nearest the
    /// frame center `(width/2, height/2)`, then to the first in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let (cx, cy) = ((self.width / 2) as i64, (self.height / 2) as i64);
        let mut best = (0usize, f64::NEG_INFINITY, i64::MAX);
        for (i, &w) in self.weights.iter().enumerate() {
            let (x, y) = ((i % self.width) as i64, (i / self.width) as i64);
            let d = (x - cx).pow(2) + (y - cy).pow(2);
            if w > best.1 || (w == best.1 && d < best.2) {
                best = (i, w, d);
            }
        }
        (best.0 % self.width, best.0 / self.width)
    }

    /// A `w`x`h` window centered on the argmax, shifted to stay inside the frame.
    pub fn crop_region(&self, w: usize, h: usize) -> Result<Region> {
        if w > self.width || h > self.height || w == 0 || h == 0 {
            return Err(Error::InvalidParameter(format!(
                "crop {w}x{h} does not fit a {}x{} frame",
                self.width, self.height
            )));
        }
        let (px, py) = self.argmax();
        let x = px.saturating_sub(w / 2).min(self.width - w);
        let y = py.saturating_sub(h / 2).min(self.height - h);
        Ok(Region::new(x, y, w, h))
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Separable Gaussian blur treating pixels outside the map as zero.
pub fn gaussian_blur_zero_padded(data: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return data.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (width as isize, height as isize);
    let mut tmp = vec![0.0; data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let sx = x + j as isize - r;
                if (0..w).contains(&sx) {
                    acc += kv * data[(y * w + sx) as usize];
                }
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0; data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let sy = y + j as isize - r;
                if (0..h).contains(&sy) {
                    acc += kv * tmp[(sy * w + x) as usize];
                }
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    out
}

/// Frame-averaged, blurred, normalized saliency of `clip`. The stub returns
/// an exactly uniform map.
pub fn saliency(h: &ProviderHandle, clip: &VideoClip) -> Result<SaliencyMap> {
    h.require(&[ProviderKind::Saliency, ProviderKind::Stub], "saliency")?;
    let (w, ht) = (clip.width(), clip.height());
    let maps: Vec<Vec<f64>> = match h.backend() {
        Backend::Stub => return Ok(SaliencyMap::uniform(w, ht)),
        Backend::Custom(b) => clip.frames().iter().map(|f| b.saliency_frame(f)).collect::<Result<_>>()?,
        Backend::Process { .. } => process::saliency_maps(h, clip)?,
    };
    let mut avg = vec![0.0; w * ht];
    for m in &maps {
        if m.len() != avg.len() {
            return Err(Error::Provider {
                provider: h.kind().to_string(),
                diagnostics: format!("saliency map has {} values, expected {}", m.len(), avg.len()),
            });
        }
        for (a, v) in avg.iter_mut().zip(m) {
            *a += v;
        }
    }
    let n = maps.len().max(1) as f64;
    avg.iter_mut().for_each(|a| *a /= n);
    let blurred = gaussian_blur_zero_padded(&avg, w, ht, BLUR_SIGMA_FRACTION * ht as f64);
    SaliencyMap::from_weights(w, ht, blurred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{Frame, FrameRate};
    use crate::neural::ProviderBackend;
    use proptest::prelude::*;
    use std::sync::Arc;

    struct Delta(usize, usize);
    impl ProviderBackend for Delta {
        fn id(&self) -> String {
            "delta".into()
        }
        fn saliency_frame(&self, f: &Frame) -> Result<Vec<f64>> {
            let mut v = vec![0.0; f.width() * f.height()];
            v[self.1 * f.width() + self.0] = 1.0;
            Ok(v)
        }
    }

    struct Raw(Vec<f64>);
    impl ProviderBackend for Raw {
        fn id(&self) -> String {
            "raw".into()
        }
        fn saliency_frame(&self, _: &Frame) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    fn clip(w: usize, h: usize, n: usize) -> VideoClip {
        let f = Frame::from_luma(w, h, vec![0; w * h]).unwrap();
        VideoClip::new(vec![f; n], FrameRate::new(30, 1).unwrap(), "s").unwrap()
    }

    #[test]
    fn stub_is_uniform_and_centers_crop() {
        let m = saliency(&ProviderHandle::stub(), &clip(40, 20, 2)).unwrap();
        assert!(m.weights.iter().all(|&w| w == 1.0 / 800.0));
        assert_eq!(m.argmax(), (20, 10));
        let full_hd = SaliencyMap::uniform(1920, 1080);
        assert_eq!(full_hd.crop_region(480, 270).unwrap(), Region::new(720, 405, 480, 270));
    }

    #[test]
    fn delta_peak_survives_blur() {
        for (x0, y0) in [(3, 4), (30, 2), (0, 0), (39, 19)] {
            let h = ProviderHandle::custom(ProviderKind::Saliency, Arc::new(Delta(x0, y0)));
            let m = saliency(&h, &clip(40, 20, 3)).unwrap();
            assert_eq!(m.argmax(), (x0, y0));
            // oracle: separable kernel value relative to the peak
            let sigma = 0.05 * 20.0;
            let expect = (-(1.0f64) / (2.0 * sigma * sigma)).exp();
            let ratio = if x0 + 1 < 40 { m.get(x0 + 1, y0) } else { m.get(x0 - 1, y0) } / m.get(x0, y0);
            assert!((ratio - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_peak_crop_is_clamped() {
        let h = ProviderHandle::custom(ProviderKind::Saliency, Arc::new(Delta(0, 0)));
        let m = saliency(&h, &clip(64, 36, 1)).unwrap();
        assert_eq!(m.crop_region(16, 9).unwrap(), Region::new(0, 0, 16, 9));
        let h = ProviderHandle::custom(ProviderKind::Saliency, Arc::new(Delta(63, 35)));
        let m = saliency(&h, &clip(64, 36, 1)).unwrap();
        assert_eq!(m.crop_region(16, 9).unwrap(), Region::new(48, 27, 16, 9));
        assert!(m.crop_region(65, 9).is_err());
    }

    #[test]
    fn negative_weights_rejected() {
        assert!(SaliencyMap::from_weights(2, 1, vec![1.0, -0.5]).is_err());
        assert!(SaliencyMap::from_weights(2, 2, vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn output_sums_to_one(raw in proptest::collection::vec(0.0f64..10.0, 96)) {
            let h = ProviderHandle::custom(ProviderKind::Saliency, Arc::new(Raw(raw)));
            let m = saliency(&h, &clip(12, 8, 2)).unwrap();
            prop_assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(m.weights.iter().all(|w| *w >= 0.0));
        }
    }
}
