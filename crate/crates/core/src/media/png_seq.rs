//! PNG frame-sequence directories, the exchange format with SR tools.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Frame, FrameRate, VideoClip};
use crate::error::{Error, Result};

/// Name of the per-directory metadata file.
pub const SIDECAR_FILE: &str = "clip.json";
const DEFAULT_FPS: f64 = 30.0;

/// Sidecar metadata stored next to a clip.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClipMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoded_bitrate_kbps: Option<f64>,
}

impl ClipMetadata {
    pub fn of(clip: &VideoClip) -> Self {
        ClipMetadata {
            fps: Some(clip.fps()),
            source_id: Some(clip.source_id.clone()),
            encoded_bitrate_kbps: clip.encoded_bitrate_kbps,
        }
    }
}

/// Shell-style match supporting `*` and `?`.
fn wildcard_match(pattern: &[u8], name: &[u8]) -> bool {
    let (mut p, mut n) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while n < name.len() {
        if p < pattern.len() && (pattern[p] == b'?' || pattern[p] == name[n]) {
            p += 1;
            n += 1;
        } else if p < pattern.len() && pattern[p] == b'*' {
            star = Some((p, n));
            p += 1;
        } else if let Some((sp, sn)) = star {
            p = sp + 1;
            n = sn + 1;
            star = Some((sp, sn + 1));
        } else {
            return false;
        }
    }
    pattern[p..].iter().all(|&c| c == b'*')
}

/// Files in `dir` whose name matches `pattern`, in lexicographic order.
pub fn matching_files(dir: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .filter(|e| wildcard_match(pattern.as_bytes(), e.file_name().as_encoded_bytes()))
        .map(|e| e.path())
        .collect();
    files.sort();
    Ok(files)
}

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Png {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub(crate) fn read_png_frame(path: &Path) -> Result<Frame> {
    let mut decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth(info.bit_depth as u32));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let data = &buf[..info.line_size * h];
    let mut rgb = Vec::with_capacity(w * h * 3);
    for row in data.chunks_exact(info.line_size) {
        for px in row[..w * channels].chunks_exact(channels) {
            match channels {
                1 | 2 => rgb.extend_from_slice(&[px[0], px[0], px[0]]),
                _ => rgb.extend_from_slice(&px[..3]),
            }
        }
    }
    Frame::from_rgb_interleaved(w, h, &rgb)
}

pub(crate) fn write_png_frame(frame: &Frame, path: &Path) -> Result<()> {
    let rgb = frame.to_rgb();
    let (w, h) = (rgb.width(), rgb.height());
    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        for p in rgb.planes() {
            data.push(p.data[i]);
        }
    }
    let mut enc = png::Encoder::new(BufWriter::new(File::create(path)?), w as u32, h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
    writer.write_image_data(&data).map_err(|e| png_err(path, e))?;
    writer.finish().map_err(|e| png_err(path, e))?;
    Ok(())
}

/// Load a directory of PNG frames as an RGB clip.
///
/// Frame order is the lexicographic order of file names. `fps`, `source_id`
/// and bitrate come from [`SIDECAR_FILE`] when present.
pub fn read_png_sequence(dir: &Path, pattern: &str) -> Result<VideoClip> {
    let files = matching_files(dir, pattern)?;
    if files.is_empty() {
        return Err(Error::NoFrames {
            dir: dir.to_path_buf(),
            pattern: pattern.to_string(),
        });
    }
    let mut frames: Vec<Frame> = Vec::with_capacity(files.len());
    for path in &files {
        let frame = read_png_frame(path)?;
        if let Some(first) = frames.first() {
            if frame.width() != first.width() || frame.height() != first.height() {
                return Err(Error::MixedResolution {
                    path: path.clone(),
                    found_w: frame.width(),
                    found_h: frame.height(),
                    expected_w: first.width(),
                    expected_h: first.height(),
                });
            }
        }
        frames.push(frame);
    }

    let sidecar = dir.join(SIDECAR_FILE);
    let meta: ClipMetadata = if sidecar.exists() {
        serde_json::from_reader(File::open(&sidecar)?)?
    } else {
        ClipMetadata::default()
    };
    let rate = FrameRate::from_fps(meta.fps.unwrap_or(DEFAULT_FPS))?;
    let source_id = meta.source_id.unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    Ok(VideoClip::new(frames, rate, source_id)?.with_bitrate(meta.encoded_bitrate_kbps))
}

/// Write `clip` as `frame_000001.png`, ... plus the sidecar. Returns the frame paths.
pub fn write_png_sequence(clip: &VideoClip, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(clip.len());
    for (i, frame) in clip.frames().iter().enumerate() {
        let path = dir.join(format!("frame_{:06}.png", i + 1));
        write_png_frame(frame, &path)?;
        paths.push(path);
    }
    let meta = ClipMetadata::of(clip);
    serde_json::to_writer_pretty(File::create(dir.join(SIDECAR_FILE))?, &meta)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::PixelFormat;

    fn solid_rgb(w: usize, h: usize, c: [u8; 3]) -> Frame {
        Frame::solid(w, h, PixelFormat::Rgb, c).unwrap()
    }

    #[test]
    fn wildcard() {
        assert!(wildcard_match(b"*.png", b"f0001.png"));
        assert!(wildcard_match(b"f????.png", b"f0001.png"));
        assert!(!wildcard_match(b"*.png", b"f0001.jpg"));
        assert!(wildcard_match(b"*", b""));
        assert!(wildcard_match(b"a*b*c", b"aXXbYc"));
    }

    #[test]
    fn solid_color_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let colors = [[255, 0, 0], [0, 255, 0], [0, 0, 255]];
        for (i, c) in colors.iter().enumerate() {
            write_png_frame(&solid_rgb(3, 2, *c), &dir.path().join(format!("f{:04}.png", i + 1))).unwrap();
        }
        let clip = read_png_sequence(dir.path(), "f*.png").unwrap();
        assert_eq!(clip.len(), 3);
        assert_eq!(clip.fps(), 30.0);
        assert!(clip.format().is_rgb());
        for (frame, c) in clip.frames().iter().zip(colors) {
            for p in 0..3 {
                assert!(frame.plane(p).data.iter().all(|&v| v == c[p]));
            }
        }
    }

    #[test]
    fn single_white_pixel() {
        let dir = tempfile::tempdir().unwrap();
        write_png_frame(&solid_rgb(1, 1, [255; 3]), &dir.path().join("a.png")).unwrap();
        let clip = read_png_sequence(dir.path(), "*.png").unwrap();
        assert_eq!(clip.len(), 1);
        assert!(clip.frames()[0].planes().iter().all(|p| p.data == vec![255]));
    }

    #[test]
    fn empty_dir_has_no_frames() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_png_sequence(dir.path(), "*.png").unwrap_err();
        assert!(err.to_string().contains("no frames"), "{err}");
    }

    #[test]
    fn mixed_resolution_names_file() {
        let dir = tempfile::tempdir().unwrap();
        write_png_frame(&solid_rgb(2, 2, [1; 3]), &dir.path().join("a.png")).unwrap();
        write_png_frame(&solid_rgb(3, 2, [1; 3]), &dir.path().join("b.png")).unwrap();
        match read_png_sequence(dir.path(), "*.png").unwrap_err() {
            Error::MixedResolution { path, .. } => assert!(path.ends_with("b.png")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn sidecar_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let clip = VideoClip::new(
            vec![solid_rgb(4, 2, [10, 20, 30]), solid_rgb(4, 2, [40, 50, 60])],
            FrameRate::new(24, 1).unwrap(),
            "restaurant",
        )
        .unwrap()
        .with_bitrate(Some(600.0));
        write_png_sequence(&clip, dir.path()).unwrap();
        let back = read_png_sequence(dir.path(), "*.png").unwrap();
        assert_eq!(back, clip);
    }
}
