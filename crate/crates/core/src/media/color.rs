//! BT.601 limited-range conversion between RGB and YCbCr.

use super::{Frame, PixelFormat, Plane};
use crate::error::Result;

const KR: f64 = 0.299;
const KB: f64 = 0.114;
const KG: f64 = 1.0 - KR - KB;

#[inline]
fn round_clamp(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[inline]
fn luma_of(r: f64, g: f64, b: f64) -> f64 {
    16.0 + 219.0 * (KR * r + KG * g + KB * b) / 255.0
}

/// Unrounded BT.601 limited-range (Y, Cb, Cr) for full-range RGB.
pub fn rgb_to_ycbcr_exact(r: u8, g: u8, b: u8) -> [f64; 3] {
    let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
    let ey = KR * r + KG * g + KB * b;
    [
        luma_of(r, g, b),
        128.0 + 224.0 * (b - ey) / (2.0 * (1.0 - KB)) / 255.0,
        128.0 + 224.0 * (r - ey) / (2.0 * (1.0 - KR)) / 255.0,
    ]
}

/// Unrounded full-range RGB for BT.601 limited-range YCbCr.
pub fn ycbcr_to_rgb_exact(y: u8, cb: u8, cr: u8) -> [f64; 3] {
    let ey = (f64::from(y) - 16.0) * 255.0 / 219.0;
    let pb = (f64::from(cb) - 128.0) * 255.0 / 224.0;
    let pr = (f64::from(cr) - 128.0) * 255.0 / 224.0;
    let r = ey + 2.0 * (1.0 - KR) * pr;
    let b = ey + 2.0 * (1.0 - KB) * pb;
    let g = (ey - KR * r - KB * b) / KG;
    [r, g, b]
}

pub(crate) fn rgb_to_luma(frame: &Frame) -> Plane {
    let [r, g, b] = [frame.plane(0), frame.plane(1), frame.plane(2)];
    let data = r
        .data
        .iter()
        .zip(&g.data)
        .zip(&b.data)
        .map(|((&r, &g), &b)| round_clamp(luma_of(f64::from(r), f64::from(g), f64::from(b))))
        .collect();
    Plane {
        width: frame.width(),
        height: frame.height(),
        data,
    }
}

fn rgb_to_yuv444(frame: &Frame) -> Result<Frame> {
    let n = frame.width() * frame.height();
    let mut out = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for i in 0..n {
        let ycc = rgb_to_ycbcr_exact(
            frame.plane(0).data[i],
            frame.plane(1).data[i],
            frame.plane(2).data[i],
        );
        for c in 0..3 {
            out[c].push(round_clamp(ycc[c]));
        }
    }
    let (w, h) = (frame.width(), frame.height());
    let planes = out
        .into_iter()
        .map(|d| Plane::new(w, h, d))
        .collect::<Result<Vec<_>>>()?;
    Frame::new(w, h, PixelFormat::Yuv444, planes)
}

fn yuv444_to_rgb(frame: &Frame) -> Result<Frame> {
    let n = frame.width() * frame.height();
    let mut out = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for i in 0..n {
        let rgb = ycbcr_to_rgb_exact(
            frame.plane(0).data[i],
            frame.plane(1).data[i],
            frame.plane(2).data[i],
        );
        for c in 0..3 {
            out[c].push(round_clamp(rgb[c]));
        }
    }
    let (w, h) = (frame.width(), frame.height());
    let planes = out
        .into_iter()
        .map(|d| Plane::new(w, h, d))
        .collect::<Result<Vec<_>>>()?;
    Frame::new(w, h, PixelFormat::Rgb, planes)
}

/// Nearest-neighbour chroma upsampling.
fn upsample_chroma(p: &Plane, w: usize, h: usize) -> Plane {
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(p.get(x / 2, y / 2));
        }
    }
    Plane {
        width: w,
        height: h,
        data,
    }
}

/// 2x2 box average with round-half-up; edge blocks average what exists.
fn downsample_chroma(p: &Plane) -> Plane {
    let (cw, ch) = (p.width.div_ceil(2), p.height.div_ceil(2));
    let mut data = Vec::with_capacity(cw * ch);
    for cy in 0..ch {
        for cx in 0..cw {
            let mut sum = 0u32;
            let mut count = 0u32;
            for y in 2 * cy..(2 * cy + 2).min(p.height) {
                for x in 2 * cx..(2 * cx + 2).min(p.width) {
                    sum += u32::from(p.get(x, y));
                    count += 1;
                }
            }
            data.push(((sum + count / 2) / count) as u8);
        }
    }
    Plane {
        width: cw,
        height: ch,
        data,
    }
}

fn yuv420_to_444(frame: &Frame) -> Result<Frame> {
    let (w, h) = (frame.width(), frame.height());
    let planes = vec![
        frame.plane(0).clone(),
        upsample_chroma(frame.plane(1), w, h),
        upsample_chroma(frame.plane(2), w, h),
    ];
    Frame::new(w, h, PixelFormat::Yuv444, planes)
}

fn yuv444_to_420(frame: &Frame) -> Result<Frame> {
    let planes = vec![
        frame.plane(0).clone(),
        downsample_chroma(frame.plane(1)),
        downsample_chroma(frame.plane(2)),
    ];
    Frame::new(frame.width(), frame.height(), PixelFormat::Yuv420, planes)
}

/// Convert `frame` to `target` layout.
///
/// RGB <-> YCbCr uses the BT.601 limited-range matrix with round-half-up and
/// clamping. Converting to the frame's own layout returns an identical copy.
pub fn convert_color(frame: &Frame, target: PixelFormat) -> Result<Frame> {
    use PixelFormat::*;
    match (frame.format(), target) {
        (a, b) if a == b => Ok(frame.clone()),
        (Rgb, Yuv444) => rgb_to_yuv444(frame),
        (Rgb, Yuv420) => yuv444_to_420(&rgb_to_yuv444(frame)?),
        (Yuv444, Rgb) => yuv444_to_rgb(frame),
        (Yuv420, Rgb) => yuv444_to_rgb(&yuv420_to_444(frame)?),
        (Yuv420, Yuv444) => yuv420_to_444(frame),
        (Yuv444, Yuv420) => yuv444_to_420(frame),
        _ => unreachable!("identical formats handled above"),
    }
}
