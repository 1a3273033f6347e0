//! Edge restoration quality: Canny edges of reference and distorted frames,
//! matched with a small positional tolerance under a global shift search,
//! scored as F1.

mod canny;

pub use canny::{detect_edges, EdgeMap, DEFAULT_HIGH, DEFAULT_LOW};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{Frame, VideoClip};
use crate::metrics::MetricValue;

pub const DEFAULT_SHIFT_RADIUS: usize = 1;
pub const DEFAULT_MATCH_TOLERANCE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErqaParams {
    pub low: f64,
    pub high: f64,
    pub shift_radius: usize,
    /// Chebyshev radius within which a distorted edge pixel may match.
    pub match_tolerance: usize,
}

impl Default for ErqaParams {
    fn default() -> Self {
        ErqaParams {
            low: DEFAULT_LOW,
            high: DEFAULT_HIGH,
            shift_radius: DEFAULT_SHIFT_RADIUS,
            match_tolerance: DEFAULT_MATCH_TOLERANCE,
        }
    }
}

impl ErqaParams {
    pub fn with_shift_radius(shift_radius: usize) -> Self {
        ErqaParams {
            shift_radius,
            ..Default::default()
        }
    }

    /// Identifies this matching variant in reports and run metadata.
    pub fn label(&self) -> String {
        format!(
            "erqa-variant(canny {}/{}, tol {}, shift {})",
            self.low, self.high, self.match_tolerance, self.shift_radius
        )
    }
}

/// Outcome of matching one pair of edge maps at the best shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeMatch {
    pub true_positives: usize,
    pub reference_edges: usize,
    pub distorted_edges: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Shift applied to the distorted edges, (dx, dy).
    pub shift: (isize, isize),
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Window offsets ordered nearest first, then row-major.
fn search_offsets(tol: isize) -> Vec<(isize, isize)> {
    let mut v: Vec<(isize, isize)> = (-tol..=tol)
        .flat_map(|oy| (-tol..=tol).map(move |ox| (ox, oy)))
        .collect();
    v.sort_by_key(|&(ox, oy)| (ox * ox + oy * oy, oy, ox));
    v
}

fn matched_count(reference: &EdgeMap, dist_points: &[(usize, usize)], shift: (isize, isize), offsets: &[(isize, isize)]) -> usize {
    let (w, h) = (reference.width as isize, reference.height as isize);
    let mut taken = vec![false; reference.mask.len()];
    let mut tp = 0;
    for &(x, y) in dist_points {
        let (sx, sy) = (x as isize + shift.0, y as isize + shift.1);
        for &(ox, oy) in offsets {
            let (rx, ry) = (sx + ox, sy + oy);
            if rx < 0 || ry < 0 || rx >= w || ry >= h {
                continue;
            }
            let i = (ry * w + rx) as usize;
            if reference.mask[i] && !taken[i] {
                taken[i] = true;
                tp += 1;
                break;
            }
        }
    }
    tp
}

/// Best-shift greedy matching of two edge maps of equal size.
pub fn match_edges(reference: &EdgeMap, distorted: &EdgeMap, shift_radius: usize, tolerance: usize) -> Result<EdgeMatch> {
    if reference.width != distorted.width || reference.height != distorted.height {
        return Err(Error::DimensionMismatch(format!(
            "edge maps {}x{} vs {}x{}",
            reference.width, reference.height, distorted.width, distorted.height
        )));
    }
    let (nr, nd) = (reference.count(), distorted.count());
    let trivial = |f1: f64| EdgeMatch {
        true_positives: 0,
        reference_edges: nr,
        distorted_edges: nd,
        precision: f1,
        recall: f1,
        f1,
        shift: (0, 0),
    };
    if nr == 0 && nd == 0 {
        return Ok(trivial(1.0));
    }
    if nr == 0 || nd == 0 {
        return Ok(trivial(0.0));
    }

    let points = distorted.points();
    let offsets = search_offsets(tolerance as isize);
    let r = shift_radius as isize;
    let mut best: Option<EdgeMatch> = None;
    // zero shift first so it wins ties
    let shifts = std::iter::once((0, 0)).chain(
        (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
            .filter(|&s| s != (0, 0)),
    );
    for shift in shifts {
        let tp = matched_count(reference, &points, shift, &offsets);
        let precision = tp as f64 / nd as f64;
        let recall = tp as f64 / nr as f64;
        let candidate = EdgeMatch {
            true_positives: tp,
            reference_edges: nr,
            distorted_edges: nd,
            precision,
            recall,
            f1: f1(precision, recall),
            shift,
        };
        if best.map_or(true, |b| candidate.f1 > b.f1) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least the zero shift is evaluated"))
}

/// Edge match of one frame pair.
pub fn erqa_frame(reference: &Frame, distorted: &Frame, params: &ErqaParams) -> Result<EdgeMatch> {
    if reference.width() != distorted.width() || reference.height() != distorted.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            distorted.width(),
            distorted.height()
        )));
    }
    let er = detect_edges(reference, params.low, params.high)?;
    let ed = detect_edges(distorted, params.low, params.high)?;
    match_edges(&er, &ed, params.shift_radius, params.match_tolerance)
}

/// ERQA of one frame pair with default detector and tolerance.
pub fn erqa_score(reference: &Frame, distorted: &Frame, shift_radius: usize) -> Result<MetricValue> {
    let m = erqa_frame(reference, distorted, &ErqaParams::with_shift_radius(shift_radius))?;
    Ok(MetricValue::scalar("erqa", m.f1))
}

/// Mean per-frame ERQA over aligned clips.
pub fn erqa_clip(reference: &VideoClip, distorted: &VideoClip, params: &ErqaParams) -> Result<MetricValue> {
    crate::metrics::check_aligned(reference, distorted)?;
    let per_frame = reference
        .frames()
        .par_iter()
        .zip(distorted.frames().par_iter())
        .map(|(a, b)| erqa_frame(a, b, params).map(|m| m.f1))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MetricValue::mean_of("erqa", per_frame))
}
