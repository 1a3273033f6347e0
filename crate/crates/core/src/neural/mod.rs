//! Learned-metric and saliency providers behind one handle type.
//!
//! A provider is either a deterministic stub, an external command, or an
//! in-process backend implementing [`ProviderBackend`]. External commands
//! exchange clips as Y4M files and report scores as JSON.

mod process;
mod saliency;
mod vmaf;

pub use process::resolve_executable;
pub use saliency::{gaussian_blur_zero_padded, saliency, SaliencyMap};
pub use vmaf::{parse_vmaf_json, vmaf_adapter};

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::media::{Frame, VideoClip};
use crate::metrics::{check_aligned, mean, sobel_magnitude_interior, MetricValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Lpips,
    Mdtvsfa,
    Saliency,
    Vmaf,
    Stub,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Lpips => "lpips",
            ProviderKind::Mdtvsfa => "mdtvsfa",
            ProviderKind::Saliency => "saliency",
            ProviderKind::Vmaf => "vmaf",
            ProviderKind::Stub => "stub",
        })
    }
}

/// In-process provider implementation. Unimplemented capabilities report a
/// provider error.
pub trait ProviderBackend: Send + Sync {
    /// Stable identity, folded into the provider hash.
    fn id(&self) -> String;

    /// Full-reference distance of one frame pair.
    fn frame_distance(&self, _reference: &Frame, _distorted: &Frame) -> Result<f64> {
        Err(self.unsupported("frame_distance"))
    }

    /// No-reference clip score.
    fn clip_score(&self, _clip: &VideoClip) -> Result<f64> {
        Err(self.unsupported("clip_score"))
    }

    /// Nonnegative per-pixel saliency of one frame, row-major.
    fn saliency_frame(&self, _frame: &Frame) -> Result<Vec<f64>> {
        Err(self.unsupported("saliency_frame"))
    }

    fn unsupported(&self, what: &str) -> Error {
        Error::Provider {
            provider: self.id(),
            diagnostics: format!("{what} not implemented by this backend"),
        }
    }
}

#[derive(Clone)]
pub(crate) enum Backend {
    Stub,
    Process { program: PathBuf, args: Vec<String> },
    Custom(Arc<dyn ProviderBackend>),
}

/// Immutable handle to a metric or saliency provider.
#[derive(Clone)]
pub struct ProviderHandle {
    kind: ProviderKind,
    model_source: String,
    config: BTreeMap<String, String>,
    backend: Backend,
    hash: String,
}

impl fmt::Debug for ProviderHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProviderHandle")
            .field("kind", &self.kind)
            .field("model_source", &self.model_source)
            .field("config", &self.config)
            .field("hash", &self.hash)
            .finish()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl ProviderHandle {
    /// Deterministic closed-form provider needing no external files.
    pub fn stub() -> Self {
        ProviderHandle {
            kind: ProviderKind::Stub,
            model_source: "stub".into(),
            config: BTreeMap::new(),
            backend: Backend::Stub,
            hash: hex(&Sha256::digest(b"stub")),
        }
    }

    /// External command provider. `template` is split on whitespace; tokens
    /// may contain `{ref}`, `{dist}`, `{clip}`, `{out}` and `{<config key>}`
    /// placeholders. The executable and a `model` config path, if any, must
    /// exist now.
    pub fn command(kind: ProviderKind, template: &str, config: BTreeMap<String, String>) -> Result<Self> {
        if kind == ProviderKind::Stub {
            return Err(Error::InvalidParameter("stub providers take no command".into()));
        }
        let mut tokens = template.split_whitespace().map(str::to_owned);
        let program = tokens
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty provider command template".into()))?;
        let program = resolve_executable(&program)?;
        let mut hasher = Sha256::new();
        hasher.update(kind.to_string());
        hasher.update([0]);
        hasher.update(template);
        for (k, v) in &config {
            hasher.update([0]);
            hasher.update(k);
            hasher.update([b'=']);
            hasher.update(v);
        }
        if let Some(model) = config.get("model") {
            let bytes = std::fs::read(model).map_err(|e| Error::Provider {
                provider: kind.to_string(),
                diagnostics: format!("model file {model}: {e}"),
            })?;
            hasher.update([0]);
            hasher.update(&bytes);
        }
        Ok(ProviderHandle {
            kind,
            model_source: template.to_owned(),
            config,
            backend: Backend::Process {
                program,
                args: tokens.collect(),
            },
            hash: hex(&hasher.finalize()),
        })
    }

    /// In-process provider.
    pub fn custom(kind: ProviderKind, backend: Arc<dyn ProviderBackend>) -> Self {
        let id = backend.id();
        ProviderHandle {
            kind,
            hash: hex(&Sha256::digest(format!("{kind}\0custom\0{id}").as_bytes())),
            model_source: id,
            config: BTreeMap::new(),
            backend: Backend::Custom(backend),
        }
    }

    pub fn kind(&self) -> ProviderKind {
        self.kind
    }

    pub fn model_source(&self) -> &str {
        &self.model_source
    }

    pub fn config(&self) -> &BTreeMap<String, String> {
        &self.config
    }

    /// Hex SHA-256 identifying the provider (template, config and model bytes).
    pub fn provider_hash(&self) -> &str {
        &self.hash
    }

    pub(crate) fn backend(&self) -> &Backend {
        &self.backend
    }

    pub(crate) fn require(&self, allowed: &[ProviderKind], op: &str) -> Result<()> {
        if allowed.contains(&self.kind) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{op} needs a provider of kind {allowed:?}, got {}",
                self.kind
            )))
        }
    }
}

/// Stub LPIPS: mean absolute luma difference divided by 255.
pub fn stub_lpips_frame(reference: &Frame, distorted: &Frame) -> f64 {
    let (a, b) = (reference.luma(), distorted.luma());
    let total: u64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| u64::from(x.abs_diff(y)))
        .sum();
    total as f64 / a.data.len() as f64 / 255.0
}

/// Stub MDTVSFA for one frame: mean interior Sobel magnitude of luma over
/// 255, clamped to [0, 1].
pub fn stub_mdtvsfa_frame(frame: &Frame) -> f64 {
    let mags = sobel_magnitude_interior(&frame.luma());
    if mags.is_empty() {
        return 0.0;
    }
    (mean(&mags) / 255.0).clamp(0.0, 1.0)
}

/// Perceptual distance, lower is better; mean over frames.
pub fn lpips_distance(h: &ProviderHandle, reference: &VideoClip, distorted: &VideoClip) -> Result<MetricValue> {
    h.require(&[ProviderKind::Lpips, ProviderKind::Stub], "lpips_distance")?;
    check_aligned(reference, distorted)?;
    let pairs = reference.frames().par_iter().zip(distorted.frames().par_iter());
    let per_frame: Vec<f64> = match h.backend() {
        Backend::Stub => pairs.map(|(a, b)| stub_lpips_frame(a, b)).collect(),
        Backend::Custom(b) => pairs.map(|(r, d)| b.frame_distance(r, d)).collect::<Result<_>>()?,
        Backend::Process { .. } => process::score_pair(h, reference, distorted)?,
    };
    check_scores(h, &per_frame, 0.0, f64::INFINITY)?;
    Ok(MetricValue::mean_of("lpips", per_frame))
}

/// No-reference quality in [0, 1], higher is better.
pub fn mdtvsfa_score(h: &ProviderHandle, distorted: &VideoClip) -> Result<MetricValue> {
    h.require(&[ProviderKind::Mdtvsfa, ProviderKind::Stub], "mdtvsfa_score")?;
    let value = match h.backend() {
        Backend::Stub => {
            let per_frame = distorted.frames().par_iter().map(stub_mdtvsfa_frame).collect();
            return Ok(MetricValue::mean_of("mdtvsfa", per_frame));
        }
        Backend::Custom(b) => b.clip_score(distorted)?,
        Backend::Process { .. } => mean(&process::score_clip(h, distorted)?),
    };
    check_scores(h, &[value], 0.0, 1.0)?;
    Ok(MetricValue::scalar("mdtvsfa", value))
}

fn check_scores(h: &ProviderHandle, values: &[f64], lo: f64, hi: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Provider {
            provider: h.kind().to_string(),
            diagnostics: "provider returned no scores".into(),
        });
    }
    match values.iter().find(|v| !(v.is_finite() && **v >= lo && **v <= hi)) {
        Some(bad) => Err(Error::Provider {
            provider: h.kind().to_string(),
            diagnostics: format!("score {bad} outside [{lo}, {hi}]"),
        }),
        None => Ok(()),
    }
}
