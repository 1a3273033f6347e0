use super::{Frame, Plane};
use crate::error::{Error, Result};

const A: f64 = -0.5;

/// Catmull-Rom cubic convolution kernel (a = -0.5).
#[inline]
pub fn catmull_rom(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Source taps and weights for each destination index along one axis.
fn axis_taps(src: usize, dst: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = (d as f64 + 0.5) * scale - 0.5;
            let base = s.floor() as isize - 1;
            let mut idx = [0usize; 4];
            let mut w = [0f64; 4];
            for k in 0..4 {
                let i = base + k as isize;
                idx[k] = i.clamp(0, src as isize - 1) as usize;
                w[k] = catmull_rom(s - i as f64);
            }
            (idx, w)
        })
        .collect()
}

fn resize_plane(p: &Plane, new_w: usize, new_h: usize) -> Plane {
    if p.width == new_w && p.height == new_h {
        return p.clone();
    }
    let xt = axis_taps(p.width, new_w);
    let yt = axis_taps(p.height, new_h);

    let mut horiz = vec![0f64; new_w * p.height];
    for y in 0..p.height {
        let row = p.row(y);
        for (x, (idx, w)) in xt.iter().enumerate() {
            let mut acc = 0.0;
            for k in 0..4 {
                acc += w[k] * f64::from(row[idx[k]]);
            }
            horiz[y * new_w + x] = acc;
        }
    }

    let mut data = Vec::with_capacity(new_w * new_h);
    for (idx, w) in &yt {
        for x in 0..new_w {
            let mut acc = 0.0;
            for k in 0..4 {
                acc += w[k] * horiz[idx[k] * new_w + x];
            }
            data.push((acc + 0.5).floor().clamp(0.0, 255.0) as u8);
        }
    }
    Plane {
        width: new_w,
        height: new_h,
        data,
    }
}

/// Separable bicubic resize with edge-clamped sampling, per plane.
pub fn bicubic_resize(frame: &Frame, new_w: usize, new_h: usize) -> Result<Frame> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::InvalidParameter(format!(
            "target size must be at least 1x1, got {new_w}x{new_h}"
        )));
    }
    let format = frame.format();
    let planes = frame
        .planes()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (pw, ph) = format.plane_dims(i, new_w, new_h);
            resize_plane(p, pw, ph)
        })
        .collect();
    Frame::new(new_w, new_h, format, planes)
}
