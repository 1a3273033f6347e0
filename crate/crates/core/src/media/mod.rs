//! Raw video representation and the transforms every metric builds on.
//!
//! Frames are planar and 8-bit. YCbCr content follows BT.601 limited range;
//! RGB content (PNG sequences, SR outputs) is full range.

mod color;
mod png_seq;
mod resize;
mod y4m;

pub use color::convert_color;
pub use png_seq::{matching_files, read_png_sequence, write_png_sequence, ClipMetadata, SIDECAR_FILE};
pub use resize::{bicubic_resize, catmull_rom};
pub use y4m::{read_y4m, read_y4m_file, write_y4m, write_y4m_file};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Only 8-bit samples are supported.
pub const BIT_DEPTH: u32 = 8;
pub const SAMPLE_MAX: u8 = u8::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColorSpace {
    Rgb,
    YCbCrBt601Limited,
}

/// Plane layout of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PixelFormat {
    /// Three full-resolution planes R, G, B.
    Rgb,
    /// Y, Cb, Cr with chroma subsampled 2x in both directions.
    Yuv420,
    /// Y, Cb, Cr at full resolution.
    Yuv444,
}

impl PixelFormat {
    pub fn color_space(self) -> ColorSpace {
        match self {
            PixelFormat::Rgb => ColorSpace::Rgb,
            PixelFormat::Yuv420 | PixelFormat::Yuv444 => ColorSpace::YCbCrBt601Limited,
        }
    }

    pub fn is_rgb(self) -> bool {
        matches!(self, PixelFormat::Rgb)
    }

    pub fn is_subsampled(self) -> bool {
        matches!(self, PixelFormat::Yuv420)
    }

    /// Dimensions of plane `index` for a frame of `width` x `height`.
    pub fn plane_dims(self, index: usize, width: usize, height: usize) -> (usize, usize) {
        if index > 0 && self.is_subsampled() {
            (width.div_ceil(2), height.div_ceil(2))
        } else {
            (width, height)
        }
    }
}

/// A single 2-D array of samples, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "plane dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "plane {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Sample with coordinates clamped to the plane edges.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    format: PixelFormat,
    planes: Vec<Plane>,
}

impl Frame {
    pub fn new(width: usize, height: usize, format: PixelFormat, planes: Vec<Plane>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if planes.len() != 3 {
            return Err(Error::InvalidFrame(format!(
                "expected 3 planes, got {}",
                planes.len()
            )));
        }
        for (i, p) in planes.iter().enumerate() {
            let (pw, ph) = format.plane_dims(i, width, height);
            if p.width != pw || p.height != ph {
                return Err(Error::InvalidFrame(format!(
                    "plane {i} is {}x{}, expected {pw}x{ph} for {format:?}",
                    p.width, p.height
                )));
            }
        }
        Ok(Frame {
            width,
            height,
            format,
            planes,
        })
    }

    /// Frame with every sample of plane `i` set to `values[i]`.
    pub fn solid(width: usize, height: usize, format: PixelFormat, values: [u8; 3]) -> Result<Self> {
        let planes = (0..3)
            .map(|i| {
                let (pw, ph) = format.plane_dims(i, width.max(1), height.max(1));
                Plane::filled(pw, ph, values[i])
            })
            .collect();
        Frame::new(width, height, format, planes)
    }

    /// Build an RGB frame from interleaved RGB bytes.
    pub fn from_rgb_interleaved(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} RGB needs {} bytes, got {}",
                width * height * 3,
                rgb.len()
            )));
        }
        let mut planes = vec![Vec::with_capacity(width * height); 3];
        for px in rgb.chunks_exact(3) {
            for c in 0..3 {
                planes[c].push(px[c]);
            }
        }
        let planes = planes
            .into_iter()
            .map(|d| Plane::new(width, height, d))
            .collect::<Result<Vec<_>>>()?;
        Frame::new(width, height, PixelFormat::Rgb, planes)
    }

    /// Grayscale content as a YUV 4:4:4 frame with neutral chroma.
    pub fn from_luma(width: usize, height: usize, luma: Vec<u8>) -> Result<Self> {
        let y = Plane::new(width, height, luma)?;
        Frame::new(
            width,
            height,
            PixelFormat::Yuv444,
            vec![y, Plane::filled(width, height, 128), Plane::filled(width, height, 128)],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn format(&self) -> PixelFormat {
        self.format
    }

    pub fn color_space(&self) -> ColorSpace {
        self.format.color_space()
    }

    pub fn bit_depth(&self) -> u32 {
        BIT_DEPTH
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn plane(&self, index: usize) -> &Plane {
        &self.planes[index]
    }

    pub fn into_planes(self) -> Vec<Plane> {
        self.planes
    }

    /// The Y plane, converting from RGB when needed.
    pub fn luma(&self) -> Plane {
        match self.format {
            PixelFormat::Rgb => color::rgb_to_luma(self),
            _ => self.planes[0].clone(),
        }
    }

    /// Interleaved-free RGB planes, converting from YCbCr when needed.
    pub fn to_rgb(&self) -> Frame {
        match self.format {
            PixelFormat::Rgb => self.clone(),
            _ => convert_color(self, PixelFormat::Rgb).expect("ycbcr to rgb is always supported"),
        }
    }

    pub fn same_geometry(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.format == other.format
    }
}

/// Frame rate as a rational, as carried by Y4M headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidParameter(format!(
                "frame rate {num}:{den} must be positive"
            )));
        }
        Ok(FrameRate { num, den })
    }

    /// Closest rational with a 1000 denominator for fractional rates.
    pub fn from_fps(fps: f64) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidParameter(format!("fps must be positive, got {fps}")));
        }
        if fps.fract() == 0.0 && fps <= f64::from(u32::MAX) {
            return FrameRate::new(fps as u32, 1);
        }
        FrameRate::new((fps * 1000.0).round() as u32, 1000)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    frames: Vec<Frame>,
    pub frame_rate: FrameRate,
    pub source_id: String,
    pub encoded_bitrate_kbps: Option<f64>,
}

impl VideoClip {
    pub fn new(frames: Vec<Frame>, frame_rate: FrameRate, source_id: impl Into<String>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::InvalidClip("a clip needs at least one frame".into()));
        };
        if let Some((i, _)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| !f.same_geometry(first))
        {
            return Err(Error::InvalidClip(format!(
                "frame {i} differs in size or format from frame 0"
            )));
        }
        Ok(VideoClip {
            frames,
            frame_rate,
            source_id: source_id.into(),
            encoded_bitrate_kbps: None,
        })
    }

    pub fn with_bitrate(mut self, kbps: Option<f64>) -> Self {
        self.encoded_bitrate_kbps = kbps;
        self
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.frame_rate.as_f64()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn format(&self) -> PixelFormat {
        self.frames[0].format()
    }

    pub fn duration_secs(&self) -> f64 {
        self.frames.len() as f64 / self.fps()
    }

    /// Replace frames while keeping metadata.
    pub fn map_frames<F>(&self, f: F) -> Result<VideoClip>
    where
        F: FnMut(&Frame) -> Result<Frame>,
    {
        let frames = self.frames.iter().map(f).collect::<Result<Vec<_>>>()?;
        let mut out = VideoClip::new(frames, self.frame_rate, self.source_id.clone())?;
        out.encoded_bitrate_kbps = self.encoded_bitrate_kbps;
        Ok(out)
    }
}

/// A rectangular area in luma/full-resolution coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Region {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Region { x, y, w, h }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Region::new(0, 0, width, height)
    }

    pub fn validate(&self, width: usize, height: usize, format: PixelFormat) -> Result<()> {
        let err = |detail| Error::RegionOutOfBounds {
            x: self.x,
            y: self.y,
            w: self.w,
            h: self.h,
            width,
            height,
            detail,
        };
        if self.w == 0 || self.h == 0 {
            return Err(err(" (empty region)"));
        }
        if self.x + self.w > width || self.y + self.h > height {
            return Err(err(""));
        }
        if format.is_subsampled() {
            let odd = self.x % 2 != 0 || self.y % 2 != 0;
            // an odd extent is fine only when it runs to the frame edge
            let odd_w = self.w % 2 != 0 && self.x + self.w != width;
            let odd_h = self.h % 2 != 0 && self.y + self.h != height;
            if odd || odd_w || odd_h {
                return Err(err(" (4:2:0 regions need even offsets and sizes)"));
            }
        }
        Ok(())
    }

    /// Region `inner` expressed relative to `self`, composed into absolute coordinates.
    pub fn compose(&self, inner: &Region) -> Region {
        Region::new(self.x + inner.x, self.y + inner.y, inner.w, inner.h)
    }
}

pub fn crop_frame(frame: &Frame, region: &Region) -> Result<Frame> {
    region.validate(frame.width(), frame.height(), frame.format())?;
    let planes = frame
        .planes()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (x, y, w, h) = if i > 0 && frame.format().is_subsampled() {
                (
                    region.x / 2,
                    region.y / 2,
                    region.w.div_ceil(2),
                    region.h.div_ceil(2),
                )
            } else {
                (region.x, region.y, region.w, region.h)
            };
            let mut data = Vec::with_capacity(w * h);
            for row in y..y + h {
                data.extend_from_slice(&p.row(row)[x..x + w]);
            }
            Plane::new(w, h, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Frame::new(region.w, region.h, frame.format(), planes)
}

/// Crop every frame of `clip` to `region`; metadata is preserved.
pub fn crop(clip: &VideoClip, region: &Region) -> Result<VideoClip> {
    region.validate(clip.width(), clip.height(), clip.format())?;
    clip.map_frames(|f| crop_frame(f, region))
}
