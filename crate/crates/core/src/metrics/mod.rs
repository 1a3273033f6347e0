//! Native full-reference and content metrics.

mod colorfulness;
mod ms_ssim;
mod psnr;
mod si_ti;

pub use colorfulness::{colorfulness, frame_colorfulness};
pub use ms_ssim::{ms_ssim, ms_ssim_frame, MS_SSIM_WEIGHTS};
pub use psnr::{psnr, psnr_frame, PSNR_CAP_DB};
pub use si_ti::{si_ti, si_ti_with_pooling, sobel_magnitude_interior, SiTi};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::VideoClip;

/// A named score with optional per-frame breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_frame: Option<Vec<f64>>,
}

impl MetricValue {
    pub fn scalar(name: impl Into<String>, value: f64) -> Self {
        MetricValue {
            name: name.into(),
            value,
            per_frame: None,
        }
    }

    /// Mean-pooled value over `per_frame`.
    pub fn mean_of(name: impl Into<String>, per_frame: Vec<f64>) -> Self {
        MetricValue {
            name: name.into(),
            value: mean(&per_frame),
            per_frame: Some(per_frame),
        }
    }
}

/// How per-frame values are pooled into a clip value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Max,
    Mean,
}

impl Pooling {
    pub fn pool(self, values: &[f64]) -> f64 {
        match self {
            Pooling::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Pooling::Mean => mean(values),
        }
    }
}

/// Sequential left-to-right mean, so results do not depend on parallelism.
pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population mean and standard deviation, two-pass.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    (m, var.sqrt())
}

pub(crate) fn check_aligned(reference: &VideoClip, distorted: &VideoClip) -> Result<()> {
    if reference.width() != distorted.width() || reference.height() != distorted.height() {
        return Err(Error::DimensionMismatch(format!(
            "reference is {}x{}, distorted is {}x{}",
            reference.width(),
            reference.height(),
            distorted.width(),
            distorted.height()
        )));
    }
    if reference.len() != distorted.len() {
        return Err(Error::DimensionMismatch(format!(
            "reference has {} frames, distorted has {}",
            reference.len(),
            distorted.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling() {
        assert_eq!(Pooling::Max.pool(&[1.0, 3.0, 2.0]), 3.0);
        assert_eq!(Pooling::Mean.pool(&[1.0, 3.0, 2.0]), 2.0);
    }

    #[test]
    fn metric_value_json_shape() {
        let v = MetricValue::mean_of("psnr", vec![40.0, 42.0]);
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["name"], "psnr");
        assert_eq!(json["value"], 41.0);
        assert_eq!(json["per_frame"][1], 42.0);
        let s = serde_json::to_string(&MetricValue::scalar("x", 1.0)).unwrap();
        assert!(!s.contains("per_frame"));
    }
}
