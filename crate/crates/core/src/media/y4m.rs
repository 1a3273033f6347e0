//! YUV4MPEG2 reading and writing.
//!
//! Supported: 8-bit 4:2:0 (all siting variants) and 4:4:4. The writer always
//! emits `C420jpeg` / `C444`; payload bytes round-trip exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::png_seq::ClipMetadata;
use super::{Frame, FrameRate, PixelFormat, Plane, VideoClip};
use crate::error::{Error, Result};

const MAGIC: &[u8] = b"YUV4MPEG2";
const FRAME_TAG: &[u8] = b"FRAME";

struct CountingReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> CountingReader<R> {
    fn read_byte(&mut self) -> std::io::Result<Option<u8>> {
        let mut b = [0u8; 1];
        loop {
            match self.inner.read(&mut b) {
                Ok(0) => return Ok(None),
                Ok(_) => {
                    self.offset += 1;
                    return Ok(Some(b[0]));
                }
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            }
        }
    }

    /// Reads up to `buf.len()` bytes; returns how many were read before EOF.
    fn fill(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            }
        }
        self.offset += filled as u64;
        Ok(filled)
    }

    /// Line up to (not including) '\n'. `None` at clean EOF before any byte.
    fn read_line(&mut self, limit: usize) -> Result<Option<(u64, Vec<u8>)>> {
        let start = self.offset;
        let mut line = Vec::new();
        loop {
            match self.read_byte()? {
                None if line.is_empty() => return Ok(None),
                None => {
                    return Err(Error::Y4mParse {
                        offset: self.offset,
                        message: "unexpected end of stream inside a header line".into(),
                    })
                }
                Some(b'\n') => return Ok(Some((start, line))),
                Some(b) => {
                    line.push(b);
                    if line.len() > limit {
                        return Err(Error::Y4mParse {
                            offset: start,
                            message: format!("header line exceeds {limit} bytes"),
                        });
                    }
                }
            }
        }
    }
}

struct Header {
    width: usize,
    height: usize,
    rate: FrameRate,
    format: PixelFormat,
}

fn parse_header(offset: u64, line: &[u8]) -> Result<Header> {
    if !line.starts_with(MAGIC) {
        return Err(Error::Y4mParse {
            offset,
            message: "missing YUV4MPEG2 magic".into(),
        });
    }
    let mut width = None;
    let mut height = None;
    let mut rate = None;
    let mut format = PixelFormat::Yuv420;

    let mut pos = offset + MAGIC.len() as u64;
    let rest = &line[MAGIC.len()..];
    for token in rest.split(|&b| b == b' ') {
        let token_offset = pos;
        pos += token.len() as u64 + 1;
        if token.is_empty() {
            continue;
        }
        let text = std::str::from_utf8(token).map_err(|_| Error::Y4mParse {
            offset: token_offset,
            message: "header parameter is not valid UTF-8".into(),
        })?;
        let bad = |what: &str| Error::Y4mParse {
            offset: token_offset,
            message: format!("malformed {what} parameter `{text}`"),
        };
        let (tag, value) = text.split_at(1);
        match tag {
            "W" => width = Some(value.parse::<usize>().map_err(|_| bad("width"))?),
            "H" => height = Some(value.parse::<usize>().map_err(|_| bad("height"))?),
            "F" => {
                let (n, d) = value.split_once(':').ok_or_else(|| bad("frame rate"))?;
                let n = n.parse::<u32>().map_err(|_| bad("frame rate"))?;
                let d = d.parse::<u32>().map_err(|_| bad("frame rate"))?;
                rate = Some(FrameRate::new(n, d).map_err(|_| bad("frame rate"))?);
            }
            "C" => {
                format = match value {
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => PixelFormat::Yuv420,
                    "444" => PixelFormat::Yuv444,
                    v => {
                        if let Some(depth) = v.split_once('p').and_then(|(_, d)| d.parse::<u32>().ok()) {
                            return Err(Error::UnsupportedBitDepth(depth));
                        }
                        return Err(Error::Y4mParse {
                            offset: token_offset,
                            message: format!("unsupported colorspace `C{v}`"),
                        });
                    }
                }
            }
            // interlacing, aspect, extensions: accepted and ignored
            "I" | "A" | "X" => {}
            _ => return Err(bad("unknown")),
        }
    }
    let width = width.filter(|&w| w > 0).ok_or(Error::Y4mParse {
        offset,
        message: "missing or zero width (W)".into(),
    })?;
    let height = height.filter(|&h| h > 0).ok_or(Error::Y4mParse {
        offset,
        message: "missing or zero height (H)".into(),
    })?;
    let rate = rate.ok_or(Error::Y4mParse {
        offset,
        message: "missing frame rate (F)".into(),
    })?;
    Ok(Header {
        width,
        height,
        rate,
        format,
    })
}

/// Decode a whole Y4M stream. `source_id` is left empty; callers label clips.
pub fn read_y4m<R: Read>(stream: R) -> Result<VideoClip> {
    let mut reader = CountingReader {
        inner: stream,
        offset: 0,
    };
    let (offset, line) = reader.read_line(4096)?.ok_or(Error::Y4mParse {
        offset: 0,
        message: "empty stream".into(),
    })?;
    let header = parse_header(offset, &line)?;

    let plane_dims: Vec<(usize, usize)> = (0..3)
        .map(|i| header.format.plane_dims(i, header.width, header.height))
        .collect();
    let frame_bytes: usize = plane_dims.iter().map(|(w, h)| w * h).sum();

    let mut frames = Vec::new();
    loop {
        let frame_index = frames.len();
        let Some((line_offset, line)) = reader.read_line(4096).map_err(|e| match e {
            Error::Y4mParse { .. } if frame_index > 0 => Error::Y4mTruncated { frame_index },
            e => e,
        })?
        else {
            break;
        };
        if !line.starts_with(FRAME_TAG) {
            return Err(Error::Y4mParse {
                offset: line_offset,
                message: format!("expected FRAME marker for frame {frame_index}"),
            });
        }
        let mut buf = vec![0u8; frame_bytes];
        if reader.fill(&mut buf)? != frame_bytes {
            return Err(Error::Y4mTruncated { frame_index });
        }
        let mut planes = Vec::with_capacity(3);
        let mut start = 0;
        for &(w, h) in &plane_dims {
            planes.push(Plane::new(w, h, buf[start..start + w * h].to_vec())?);
            start += w * h;
        }
        frames.push(Frame::new(header.width, header.height, header.format, planes)?);
    }
    if frames.is_empty() {
        return Err(Error::Y4mParse {
            offset: reader.offset,
            message: "stream contains no frames".into(),
        });
    }
    VideoClip::new(frames, header.rate, "")
}

/// Read a `.y4m` file; a `<file>.json` sidecar, when present, supplies
/// `source_id` and `encoded_bitrate_kbps`.
pub fn read_y4m_file(path: &Path) -> Result<VideoClip> {
    let mut clip = read_y4m(BufReader::new(File::open(path)?))?;
    clip.source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let meta: ClipMetadata = serde_json::from_reader(File::open(&sidecar)?)?;
        if let Some(id) = meta.source_id {
            clip.source_id = id;
        }
        clip.encoded_bitrate_kbps = meta.encoded_bitrate_kbps;
    }
    Ok(clip)
}

pub(crate) fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Write `clip` as Y4M. RGB clips are rejected; convert them first.
pub fn write_y4m<W: Write>(clip: &VideoClip, mut out: W) -> Result<()> {
    let tag = match clip.format() {
        PixelFormat::Yuv420 => "420jpeg",
        PixelFormat::Yuv444 => "444",
        PixelFormat::Rgb => {
            return Err(Error::UnsupportedConversion(
                "Y4M carries YCbCr only; convert RGB clips before writing".into(),
            ))
        }
    };
    writeln!(
        out,
        "YUV4MPEG2 W{} H{} F{}:{} Ip A1:1 C{}",
        clip.width(),
        clip.height(),
        clip.frame_rate.num,
        clip.frame_rate.den,
        tag
    )?;
    for frame in clip.frames() {
        out.write_all(b"FRAME\n")?;
        for plane in frame.planes() {
            out.write_all(&plane.data)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_y4m_file(clip: &VideoClip, path: &Path) -> Result<()> {
    write_y4m(clip, BufWriter::new(File::create(path)?))
}
