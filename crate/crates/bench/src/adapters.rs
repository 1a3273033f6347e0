//! Codec and SR tool adapters, including the built-in mock tools.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use srvqa_core::media::{bicubic_resize, matching_files, read_png_sequence, read_y4m_file, write_png_sequence, VideoClip, SIDECAR_FILE};
use srvqa_core::neural::resolve_executable;

use crate::config::{BuiltinCodec, BuiltinSr, CodecSpec, SrSpec};
use crate::error::{BenchError, Result};

pub const FRAME_PATTERN: &str = "*.png";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolOutput {
    pub command: String,
    pub stdout: String,
    pub stderr: String,
}

/// `600.0` -> "600", `0.5` -> "0.5".
pub fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Split `template` on whitespace, substitute `{name}` tokens and run it.
pub fn run_template(template: &str, vars: &[(&str, String)]) -> Result<ToolOutput> {
    let mut tokens = template.split_whitespace();
    let program = tokens.next().ok_or_else(|| BenchError::Config("empty command template".into()))?;
    let exe = resolve_executable(program).map_err(|_| BenchError::ToolNotFound(program.to_owned()))?;
    let args: Vec<String> = tokens
        .map(|t| {
            vars.iter()
                .fold(t.to_owned(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
        })
        .collect();
    let command = format!("{} {}", exe.display(), args.join(" "));
    log::debug!("running {command}");
    let out = Command::new(&exe).args(&args).output().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            BenchError::ToolNotFound(program.to_owned())
        } else {
            BenchError::Io(e)
        }
    })?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    if !out.status.success() {
        return Err(BenchError::ToolFailed {
            tool: program.to_owned(),
            status: out.status.to_string(),
            stderr: stderr.trim().to_owned(),
        });
    }
    Ok(ToolOutput { command, stdout, stderr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeOutput {
    pub encoded: PathBuf,
    /// Decoded Y4M.
    pub decoded: PathBuf,
    /// From the encoded file size and the clip duration.
    pub achieved_kbps: f64,
    pub tool: Vec<ToolOutput>,
}

/// Encode the Y4M at `input` at `bitrate_kbps` into `out_dir`.
pub fn encode_adapter(codec: &CodecSpec, input: &Path, duration_secs: f64, bitrate_kbps: f64, out_dir: &Path) -> Result<EncodeOutput> {
    std::fs::create_dir_all(out_dir)?;
    if !(duration_secs > 0.0) {
        return Err(BenchError::Config(format!("clip duration {duration_secs} s is not positive")));
    }
    let encoded = out_dir.join("encoded.bin");
    let mut tool = Vec::new();
    match (&codec.template, codec.builtin) {
        (_, Some(BuiltinCodec::Copy)) => {
            std::fs::copy(input, &encoded)?;
        }
        (Some(t), None) => tool.push(run_template(
            t,
            &[
                ("input", input.display().to_string()),
                ("output", encoded.display().to_string()),
                ("bitrate_kbps", format_number(bitrate_kbps)),
                ("preset", codec.preset.clone()),
            ],
        )?),
        (None, None) => return Err(BenchError::Config(format!("codec `{}` has no tool", codec.name))),
    }
    if !encoded.is_file() {
        return Err(BenchError::ToolFailed {
            tool: codec.name.clone(),
            status: "success".into(),
            stderr: format!("no output written to {}", encoded.display()),
        });
    }
    let bytes = std::fs::metadata(&encoded)?.len();
    let achieved_kbps = bytes as f64 * 8.0 / 1000.0 / duration_secs;
    let decoded = match &codec.decode_template {
        Some(t) => {
            let decoded = out_dir.join("decoded.y4m");
            tool.push(run_template(
                t,
                &[
                    ("input", encoded.display().to_string()),
                    ("output", decoded.display().to_string()),
                ],
            )?);
            decoded
        }
        None => encoded.clone(),
    };
    Ok(EncodeOutput {
        encoded,
        decoded,
        achieved_kbps,
        tool,
    })
}

/// Load a decoded encode and attach its achieved bitrate.
pub fn load_decoded(out: &EncodeOutput) -> Result<VideoClip> {
    Ok(read_y4m_file(&out.decoded)?.with_bitrate(Some(out.achieved_kbps)))
}

pub fn count_frames(dir: &Path) -> Result<usize> {
    Ok(matching_files(dir, FRAME_PATTERN)?.len())
}

/// Bicubic ×`scale` of every PNG frame in `in_dir`; optionally drop the last frame.
pub fn resize_frames(in_dir: &Path, out_dir: &Path, scale: usize, drop_last: bool) -> Result<usize> {
    let clip = read_png_sequence(in_dir, FRAME_PATTERN)?;
    let (w, h) = (clip.width() * scale, clip.height() * scale);
    let mut frames: Vec<_> = clip
        .frames()
        .iter()
        .map(|f| bicubic_resize(f, w, h))
        .collect::<srvqa_core::Result<_>>()?;
    if drop_last && frames.len() > 1 {
        frames.pop();
    }
    let n = frames.len();
    let out = VideoClip::new(frames, clip.frame_rate, clip.source_id.clone())?.with_bitrate(clip.encoded_bitrate_kbps);
    write_png_sequence(&out, out_dir)?;
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrOutput {
    pub frames: usize,
    pub passes: usize,
    pub tool: Vec<ToolOutput>,
}

/// Run `sr` on the PNG frames in `in_dir` until `total_scale` is reached.
/// A 2× method runs twice for 4×.
pub fn sr_adapter(sr: &SrSpec, in_dir: &Path, out_dir: &Path, total_scale: usize) -> Result<SrOutput> {
    let expected = count_frames(in_dir)?;
    let mut passes = 1;
    let mut reached = sr.scale;
    while reached < total_scale {
        reached *= sr.scale;
        passes += 1;
    }
    if reached != total_scale {
        return Err(BenchError::Config(format!(
            "SR method `{}` scales by {} and cannot reach {total_scale}",
            sr.name, sr.scale
        )));
    }
    let mut tool = Vec::new();
    let mut current = in_dir.to_path_buf();
    for pass in 1..=passes {
        let target = if pass == passes {
            out_dir.to_path_buf()
        } else {
            out_dir.with_extension(format!("pass{pass}"))
        };
        if target.exists() {
            std::fs::remove_dir_all(&target)?;
        }
        std::fs::create_dir_all(&target)?;
        match (&sr.template, sr.builtin) {
            (_, Some(BuiltinSr::Bicubic)) => {
                resize_frames(&current, &target, sr.scale, false)?;
            }
            (Some(t), None) => tool.push(run_template(
                t,
                &[
                    ("in_dir", current.display().to_string()),
                    ("out_dir", target.display().to_string()),
                    ("scale", sr.scale.to_string()),
                ],
            )?),
            (None, None) => return Err(BenchError::Config(format!("SR method `{}` has no tool", sr.name))),
        }
        let found = count_frames(&target)?;
        if found != expected {
            return Err(BenchError::FrameCountMismatch {
                expected,
                found,
                dir: target,
            });
        }
        let sidecar = current.join(SIDECAR_FILE);
        if sidecar.exists() && !target.join(SIDECAR_FILE).exists() {
            std::fs::copy(&sidecar, target.join(SIDECAR_FILE))?;
        }
        if current != in_dir {
            std::fs::remove_dir_all(&current)?;
        }
        current = target;
    }
    Ok(SrOutput {
        frames: expected,
        passes,
        tool,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use srvqa_core::media::{write_y4m_file, Frame, FrameRate};

    fn clip(w: usize, h: usize, n: usize) -> VideoClip {
        let frames = (0..n)
            .map(|k| Frame::from_luma(w, h, (0..w * h).map(|i| ((i * 7 + k * 13) % 251) as u8).collect()).unwrap())
            .collect();
        VideoClip::new(frames, FrameRate::new(25, 1).unwrap(), "t").unwrap()
    }

    #[test]
    fn numbers_in_templates() {
        assert_eq!(format_number(600.0), "600");
        assert_eq!(format_number(0.5), "0.5");
    }

    #[test]
    fn copy_codec_bitrate_is_file_rate() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.y4m");
        let c = clip(16, 8, 5);
        write_y4m_file(&c, &input).unwrap();
        let codec = CodecSpec {
            name: "copy".into(),
            template: None,
            builtin: Some(BuiltinCodec::Copy),
            decode_template: None,
            preset: "medium".into(),
        };
        let out = encode_adapter(&codec, &input, c.duration_secs(), 600.0, &dir.path().join("e")).unwrap();
        let size = std::fs::metadata(&input).unwrap().len() as f64;
        assert!((out.achieved_kbps - size * 8.0 / 1000.0 / 0.2).abs() < 1e-9);
        let back = load_decoded(&out).unwrap();
        assert_eq!(back.frames(), c.frames());
        assert_eq!(back.encoded_bitrate_kbps, Some(out.achieved_kbps));
    }

    #[test]
    fn builtin_bicubic_reaches_full_size() {
        let dir = tempfile::tempdir().unwrap();
        let inp = dir.path().join("in");
        write_png_sequence(&clip(480, 270, 2), &inp).unwrap();
        let sr = SrSpec {
            name: "bicubic".into(),
            template: None,
            builtin: Some(BuiltinSr::Bicubic),
            scale: 4,
        };
        let out = sr_adapter(&sr, &inp, &dir.path().join("out"), 4).unwrap();
        assert_eq!((out.frames, out.passes), (2, 1));
        let up = read_png_sequence(&dir.path().join("out"), FRAME_PATTERN).unwrap();
        assert_eq!((up.width(), up.height()), (1920, 1080));
        assert!(dir.path().join("out").join(SIDECAR_FILE).exists());
    }

    #[test]
    fn two_x_runs_twice() {
        let dir = tempfile::tempdir().unwrap();
        let inp = dir.path().join("in");
        write_png_sequence(&clip(12, 8, 3), &inp).unwrap();
        let sr = SrSpec {
            name: "half".into(),
            template: None,
            builtin: Some(BuiltinSr::Bicubic),
            scale: 2,
        };
        let out = sr_adapter(&sr, &inp, &dir.path().join("out"), 4).unwrap();
        assert_eq!(out.passes, 2);
        let up = read_png_sequence(&dir.path().join("out"), FRAME_PATTERN).unwrap();
        assert_eq!((up.width(), up.height()), (48, 32));
        assert!(!dir.path().join("out.pass1").exists());
    }

    #[test]
    fn missing_tool() {
        let e = run_template("/definitely/not/here {input}", &[]).unwrap_err();
        assert!(matches!(e, BenchError::ToolNotFound(_)));
    }
}
