//! External-command providers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use super::{Backend, ProviderHandle};
use crate::error::{Error, Result};
use crate::media::{convert_color, read_png_sequence, write_y4m_file, PixelFormat, VideoClip};

/// Locate `name` as a path or on `PATH`.
pub fn resolve_executable(name: &str) -> Result<PathBuf> {
    let candidate = Path::new(name);
    if candidate.components().count() > 1 || candidate.is_absolute() {
        return if is_executable(candidate) {
            Ok(candidate.to_path_buf())
        } else {
            Err(Error::ToolNotFound(name.to_owned()))
        };
    }
    std::env::var_os("PATH")
        .iter()
        .flat_map(std::env::split_paths)
        .map(|dir| dir.join(name))
        .find(|p| is_executable(p))
        .ok_or_else(|| Error::ToolNotFound(name.to_owned()))
}

#[cfg(unix)]
fn is_executable(p: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    p.metadata().map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0).unwrap_or(false)
}

#[cfg(not(unix))]
fn is_executable(p: &Path) -> bool {
    p.is_file()
}

fn substitute(arg: &str, vars: &BTreeMap<String, String>) -> String {
    let mut out = arg.to_owned();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

/// Run the handle's command with `vars` (plus its config) substituted.
pub(crate) fn run(h: &ProviderHandle, vars: &[(&str, &Path)]) -> Result<()> {
    let Backend::Process { program, args } = h.backend() else {
        return Err(Error::InvalidParameter("provider is not an external command".into()));
    };
    let mut all: BTreeMap<String, String> = h.config().clone();
    for (k, v) in vars {
        all.insert((*k).to_owned(), v.display().to_string());
    }
    let args: Vec<String> = args.iter().map(|a| substitute(a, &all)).collect();
    log::debug!("running {} {}", program.display(), args.join(" "));
    let output = Command::new(program).args(&args).output().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::ToolNotFound(program.display().to_string())
        } else {
            Error::Provider {
                provider: h.kind().to_string(),
                diagnostics: format!("failed to start {}: {e}", program.display()),
            }
        }
    })?;
    if !output.status.success() {
        return Err(Error::Provider {
            provider: h.kind().to_string(),
            diagnostics: format!(
                "{} exited with {}: {}",
                program.display(),
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ),
        });
    }
    Ok(())
}

pub(crate) fn read_output(h: &ProviderHandle, path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Provider {
        provider: h.kind().to_string(),
        diagnostics: format!("no output at {}: {e}", path.display()),
    })
}

fn write_clip(clip: &VideoClip, path: &Path) -> Result<()> {
    if clip.format().is_rgb() {
        let yuv = clip.map_frames(|f| convert_color(f, PixelFormat::Yuv444))?;
        write_y4m_file(&yuv, path)
    } else {
        write_y4m_file(clip, path)
    }
}

/// Scores from `{"per_frame": [..]}`, `{"value": x}`, `[..]` or a bare number.
fn parse_scores(h: &ProviderHandle, text: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Provider {
        provider: h.kind().to_string(),
        diagnostics: format!("unparsable output ({why}): {}", text.trim()),
    };
    let v: Value = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
    let list = |a: &Vec<Value>| -> Result<Vec<f64>> {
        a.iter().map(|x| x.as_f64().ok_or_else(|| bad("non-numeric score"))).collect()
    };
    match &v {
        Value::Number(n) => Ok(vec![n.as_f64().ok_or_else(|| bad("number"))?]),
        Value::Array(a) => list(a),
        Value::Object(o) => {
            if let Some(Value::Array(a)) = o.get("per_frame") {
                list(a)
            } else if let Some(x) = o.get("value").and_then(Value::as_f64) {
                Ok(vec![x])
            } else {
                Err(bad("expected `per_frame` or `value`"))
            }
        }
        _ => Err(bad("expected a number, list or object")),
    }
}

pub(crate) fn score_pair(h: &ProviderHandle, reference: &VideoClip, distorted: &VideoClip) -> Result<Vec<f64>> {
    let dir = tempfile::tempdir()?;
    let (r, d, out) = (dir.path().join("ref.y4m"), dir.path().join("dist.y4m"), dir.path().join("out.json"));
    write_clip(reference, &r)?;
    write_clip(distorted, &d)?;
    run(h, &[("ref", &r), ("dist", &d), ("out", &out)])?;
    parse_scores(h, &read_output(h, &out)?)
}

pub(crate) fn score_clip(h: &ProviderHandle, clip: &VideoClip) -> Result<Vec<f64>> {
    let dir = tempfile::tempdir()?;
    let (c, out) = (dir.path().join("clip.y4m"), dir.path().join("out.json"));
    write_clip(clip, &c)?;
    run(h, &[("clip", &c), ("dist", &c), ("out", &out)])?;
    parse_scores(h, &read_output(h, &out)?)
}

/// Per-frame maps written by the tool as grayscale PNGs into `{out}`.
pub(crate) fn saliency_maps(h: &ProviderHandle, clip: &VideoClip) -> Result<Vec<Vec<f64>>> {
    let dir = tempfile::tempdir()?;
    let (c, out) = (dir.path().join("clip.y4m"), dir.path().join("maps"));
    std::fs::create_dir(&out)?;
    write_clip(clip, &c)?;
    run(h, &[("clip", &c), ("out", &out)])?;
    let maps = read_png_sequence(&out, "*.png").map_err(|e| Error::Provider {
        provider: h.kind().to_string(),
        diagnostics: format!("reading saliency maps: {e}"),
    })?;
    if maps.width() != clip.width() || maps.height() != clip.height() {
        return Err(Error::Provider {
            provider: h.kind().to_string(),
            diagnostics: format!(
                "saliency maps are {}x{}, clip is {}x{}",
                maps.width(),
                maps.height(),
                clip.width(),
                clip.height()
            ),
        });
    }
    Ok(maps.frames().iter().map(|f| f.plane(0).to_f64()).collect())
}
