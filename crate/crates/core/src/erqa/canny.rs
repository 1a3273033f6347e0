//! Canny edge detector: 5x5 Gaussian (sigma 1.4), Sobel, non-maximum
//! suppression, double-threshold hysteresis. Borders are replicated.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::media::{Frame, Plane};

pub const DEFAULT_LOW: f64 = 100.0;
pub const DEFAULT_HIGH: f64 = 200.0;

const GAUSS_SIGMA: f64 = 1.4;
const TAN_22_5: f64 = 0.414_213_562_373_095_1;

/// Binary edge indicator, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
}

impl EdgeMap {
    pub fn empty(width: usize, height: usize) -> Self {
        EdgeMap {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    pub fn from_points(width: usize, height: usize, points: &[(usize, usize)]) -> Self {
        let mut map = EdgeMap::empty(width, height);
        for &(x, y) in points {
            map.mask[y * width + x] = true;
        }
        map
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Edge coordinates in row-major order.
    pub fn points(&self) -> Vec<(usize, usize)> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }
}

struct Field {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Field {
    #[inline]
    fn at(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.v[y * self.w + x]
    }
}

fn gaussian_5x5(p: &Plane) -> Field {
    let mut taps = [0.0; 5];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *t = (-d * d / (2.0 * GAUSS_SIGMA * GAUSS_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);

    let (w, h) = (p.width, p.height);
    let src = Field { w, h, v: p.to_f64() };
    let mut tmp = Field { w, h, v: vec![0.0; w * h] };
    for y in 0..h as isize {
        for x in 0..w as isize {
            tmp.v[y as usize * w + x as usize] = taps[2] * src.at(x, y)
                + taps[1] * (src.at(x - 1, y) + src.at(x + 1, y))
                + taps[0] * (src.at(x - 2, y) + src.at(x + 2, y));
        }
    }
    let mut out = Field { w, h, v: vec![0.0; w * h] };
    for y in 0..h as isize {
        for x in 0..w as isize {
            out.v[y as usize * w + x as usize] = taps[2] * tmp.at(x, y)
                + taps[1] * (tmp.at(x, y - 1) + tmp.at(x, y + 1))
                + taps[0] * (tmp.at(x, y - 2) + tmp.at(x, y + 2));
        }
    }
    out
}

/// Gradient components and L2 magnitude of the smoothed luma.
fn gradients(s: &Field) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = s.w * s.h;
    let (mut gx, mut gy, mut mag) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for y in 0..s.h as isize {
        for x in 0..s.w as isize {
            let i = y as usize * s.w + x as usize;
            // outer taps paired first so mirrored inputs give bit-identical sums
            gx[i] = ((s.at(x + 1, y - 1) + s.at(x + 1, y + 1)) + 2.0 * s.at(x + 1, y))
                - ((s.at(x - 1, y - 1) + s.at(x - 1, y + 1)) + 2.0 * s.at(x - 1, y));
            gy[i] = ((s.at(x - 1, y + 1) + s.at(x + 1, y + 1)) + 2.0 * s.at(x, y + 1))
                - ((s.at(x - 1, y - 1) + s.at(x + 1, y - 1)) + 2.0 * s.at(x, y - 1));
            mag[i] = (gx[i] * gx[i] + gy[i] * gy[i]).sqrt();
        }
    }
    (gx, gy, mag)
}

/// Neighbour offsets along the quantized gradient direction.
fn direction_offsets(gx: f64, gy: f64) -> [(isize, isize); 2] {
    let (ax, ay) = (gx.abs(), gy.abs());
    if ay <= ax * TAN_22_5 {
        [(-1, 0), (1, 0)]
    } else if ax <= ay * TAN_22_5 {
        [(0, -1), (0, 1)]
    } else if gx * gy > 0.0 {
        [(-1, -1), (1, 1)]
    } else {
        [(1, -1), (-1, 1)]
    }
}

/// Run the detector on the luma of `frame`.
pub fn detect_edges(frame: &Frame, low: f64, high: f64) -> Result<EdgeMap> {
    if !(low >= 0.0 && low < high && high.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "edge thresholds must satisfy 0 <= low < high, got low={low} high={high}"
        )));
    }
    let luma = frame.luma();
    let (w, h) = (luma.width, luma.height);
    let smooth = gaussian_5x5(&luma);
    let (gx, gy, mag) = gradients(&smooth);

    let mag_at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    // Ties along the gradient keep both pixels so the result stays mirror-symmetric.
    let mut candidate = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m < low || m == 0.0 {
                continue;
            }
            let [a, b] = direction_offsets(gx[i], gy[i]);
            let (xi, yi) = (x as isize, y as isize);
            if m >= mag_at(xi + a.0, yi + a.1) && m >= mag_at(xi + b.0, yi + b.1) {
                candidate[i] = true;
            }
        }
    }

    let mut edges = EdgeMap::empty(w, h);
    let mut queue: VecDeque<usize> = VecDeque::new();
    for i in 0..w * h {
        if candidate[i] && mag[i] >= high {
            edges.mask[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if candidate[j] && !edges.mask[j] {
                    edges.mask[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(w: usize, h: usize, col: usize) -> Frame {
        let luma = (0..w * h).map(|i| if i % w >= col { 255 } else { 0 }).collect();
        Frame::from_luma(w, h, luma).unwrap()
    }

    #[test]
    fn constant_frame_has_no_edges() {
        let f = Frame::from_luma(12, 9, vec![77; 108]).unwrap();
        assert_eq!(detect_edges(&f, DEFAULT_LOW, DEFAULT_HIGH).unwrap().count(), 0);
    }

    #[test]
    fn vertical_step_edges_hug_the_step() {
        for col in [3, 8, 12] {
            let e = detect_edges(&step(16, 10, col), DEFAULT_LOW, DEFAULT_HIGH).unwrap();
            assert!(e.count() > 0);
            for (x, _) in e.points() {
                assert!((col - 1..=col + 1).contains(&x), "edge at column {x} for step at {col}");
            }
            // every row carries the edge
            for y in 0..10 {
                assert!((0..16).any(|x| e.get(x, y)));
            }
        }
    }

    #[test]
    fn mirror_symmetry() {
        let (w, h) = (17, 13);
        let luma: Vec<u8> = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if (x as isize - 5).pow(2) + (y as isize - 6).pow(2) < 16 || x > 12 {
                    230
                } else {
                    20
                }
            })
            .collect();
        let mirrored: Vec<u8> = (0..w * h).map(|i| luma[(i / w) * w + (w - 1 - i % w)]).collect();
        let a = detect_edges(&Frame::from_luma(w, h, luma).unwrap(), 100.0, 200.0).unwrap();
        let b = detect_edges(&Frame::from_luma(w, h, mirrored).unwrap(), 100.0, 200.0).unwrap();
        for y in 0..h {
            for x in 0..w {
                assert_eq!(a.get(x, y), b.get(w - 1 - x, y), "({x},{y})");
            }
        }
    }

    #[test]
    fn bad_thresholds() {
        let f = step(8, 8, 4);
        assert!(detect_edges(&f, 200.0, 100.0).is_err());
        assert!(detect_edges(&f, -1.0, 100.0).is_err());
        assert!(detect_edges(&f, 50.0, 50.0).is_err());
    }
}
