//! Declarative pipeline configuration (TOML, `schema_version = 1`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srvqa_core::neural::{ProviderHandle, ProviderKind};

use crate::error::{BenchError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "SRVQA_WORKERS";
pub const NO_SR: &str = "No SR";
pub const DEFAULT_BITRATES_KBPS: [f64; 6] = [100.0, 300.0, 600.0, 1000.0, 2000.0, 4000.0];
pub const DEFAULT_STUDY_BITRATES_KBPS: [f64; 3] = [600.0, 1000.0, 2000.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Psnr,
    MsSsim,
    Erqa,
    Lpips,
    Mdtvsfa,
    Vmaf,
    SiTi,
    Colorfulness,
}

impl MetricName {
    pub fn column(self) -> &'static str {
        match self {
            MetricName::Psnr => "psnr",
            MetricName::MsSsim => "ms_ssim",
            MetricName::Erqa => "erqa",
            MetricName::Lpips => "lpips",
            MetricName::Mdtvsfa => "mdtvsfa",
            MetricName::Vmaf => "vmaf",
            MetricName::SiTi => "si_ti",
            MetricName::Colorfulness => "colorfulness",
        }
    }
}

fn default_metrics() -> Vec<MetricName> {
    use MetricName::*;
    vec![Psnr, MsSsim, Erqa, Lpips, Mdtvsfa, SiTi, Colorfulness]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub id: String,
    /// A `.y4m` file or a directory of PNG frames.
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinCodec {
    /// Output is the input file, byte for byte.
    Copy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecSpec {
    pub name: String,
    /// Needs `{input}`, `{output}`, `{bitrate_kbps}`; may use `{preset}`.
    #[serde(default)]
    pub template: Option<String>,
    #[serde(default)]
    pub builtin: Option<BuiltinCodec>,
    /// Turns the encoded file into Y4M: `{input}`, `{output}`. Without it the
    /// encoder output must already be Y4M.
    #[serde(default)]
    pub decode_template: Option<String>,
    #[serde(default = "default_preset")]
    pub preset: String,
}

fn default_preset() -> String {
    "medium".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinSr {
    Bicubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrSpec {
    pub name: String,
    /// Needs `{in_dir}` and `{out_dir}`.
    #[serde(default)]
    pub template: Option<String>,
    #[serde(default)]
    pub builtin: Option<BuiltinSr>,
    /// Upscale factor of one invocation: 2 or 4.
    #[serde(default = "default_scale")]
    pub scale: usize,
}

fn default_scale() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSpec {
    pub template: String,
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSpecs {
    #[serde(default)]
    pub lpips: Option<ProviderSpec>,
    #[serde(default)]
    pub mdtvsfa: Option<ProviderSpec>,
    #[serde(default)]
    pub saliency: Option<ProviderSpec>,
    #[serde(default)]
    pub vmaf: Option<ProviderSpec>,
}

/// Resolved provider handles; missing entries are stubs.
#[derive(Debug, Clone)]
pub struct Providers {
    pub lpips: ProviderHandle,
    pub mdtvsfa: ProviderHandle,
    pub saliency: ProviderHandle,
    pub vmaf: Option<ProviderHandle>,
}

impl Providers {
    pub fn hashes(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        out.insert("lpips".into(), self.lpips.provider_hash().to_owned());
        out.insert("mdtvsfa".into(), self.mdtvsfa.provider_hash().to_owned());
        out.insert("saliency".into(), self.saliency.provider_hash().to_owned());
        if let Some(v) = &self.vmaf {
            out.insert("vmaf".into(), v.provider_hash().to_owned());
        }
        out
    }
}

impl ProviderSpecs {
    pub fn resolve(&self) -> Result<Providers> {
        let make = |kind, spec: &Option<ProviderSpec>| -> Result<ProviderHandle> {
            match spec {
                None => Ok(ProviderHandle::stub()),
                Some(s) => Ok(ProviderHandle::command(kind, &s.template, s.config.clone())?),
            }
        };
        Ok(Providers {
            lpips: make(ProviderKind::Lpips, &self.lpips)?,
            mdtvsfa: make(ProviderKind::Mdtvsfa, &self.mdtvsfa)?,
            saliency: make(ProviderKind::Saliency, &self.saliency)?,
            vmaf: match &self.vmaf {
                None => None,
                Some(s) => Some(ProviderHandle::command(ProviderKind::Vmaf, &s.template, s.config.clone())?),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    #[serde(default = "default_crop_w")]
    pub crop_width: usize,
    #[serde(default = "default_crop_h")]
    pub crop_height: usize,
}

fn default_crop_w() -> usize {
    480
}

fn default_crop_h() -> usize {
    270
}

impl Default for StudySpec {
    fn default() -> Self {
        StudySpec {
            crop_width: default_crop_w(),
            crop_height: default_crop_h(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `SRVQA_WORKERS` overrides, default is the CPU count.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_downscale")]
    pub downscale_factor: usize,
    #[serde(default = "default_bitrates")]
    pub target_bitrates_kbps: Vec<f64>,
    #[serde(default = "default_study_bitrates")]
    pub study_bitrates_kbps: Vec<f64>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricName>,
    /// Quality axis of RD curves and the ranking score without subjective data.
    #[serde(default = "default_rd_metric")]
    pub rd_quality_metric: MetricName,
    #[serde(default = "default_true")]
    pub include_no_sr: bool,
    #[serde(default)]
    pub erqa_shift_radius: Option<usize>,
    pub sources: Vec<SourceSpec>,
    pub codecs: Vec<CodecSpec>,
    pub sr_methods: Vec<SrSpec>,
    #[serde(default)]
    pub providers: ProviderSpecs,
    #[serde(default)]
    pub study: Option<StudySpec>,
    /// CSV with columns clip, label, score (label is "method + codec").
    #[serde(default)]
    pub subjective_scores: Option<PathBuf>,
}

fn default_downscale() -> usize {
    4
}

fn default_bitrates() -> Vec<f64> {
    DEFAULT_BITRATES_KBPS.to_vec()
}

fn default_study_bitrates() -> Vec<f64> {
    DEFAULT_STUDY_BITRATES_KBPS.to_vec()
}

fn default_rd_metric() -> MetricName {
    MetricName::Erqa
}

fn default_true() -> bool {
    true
}

fn require_placeholders(what: &str, template: &str, needed: &[&str]) -> Result<()> {
    let missing: Vec<&str> = needed.iter().copied().filter(|p| !template.contains(p)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(BenchError::Config(format!("{what} template `{template}` lacks {}", missing.join(", "))))
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<PipelineConfig> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| BenchError::ConfigParse {
            path: base_dir.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        PipelineConfig::from_toml_str(&text, base).map_err(|e| match e {
            BenchError::ConfigParse { message, .. } => BenchError::ConfigParse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for s in &mut self.sources {
            fix(&mut s.path);
        }
        if let Some(p) = &mut self.subjective_scores {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(BenchError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return err(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.sources.is_empty() || self.codecs.is_empty() {
            return err("need at least one source and one codec".into());
        }
        if self.sr_methods.is_empty() && !self.include_no_sr {
            return err("no SR methods and the No SR path disabled".into());
        }
        if !matches!(self.downscale_factor, 2 | 4) {
            return err(format!("downscale_factor must be 2 or 4, got {}", self.downscale_factor));
        }
        let b = &self.target_bitrates_kbps;
        if b.is_empty() || b.iter().any(|x| !(*x > 0.0)) || b.windows(2).any(|w| w[0] >= w[1]) {
            return err(format!("target bitrates must be positive and strictly ascending: {b:?}"));
        }
        if let Some(x) = self.study_bitrates_kbps.iter().find(|x| !b.contains(x)) {
            return err(format!("study bitrate {x} is not a target bitrate"));
        }
        if self.workers == Some(0) {
            return err("workers must be at least 1".into());
        }
        let mut names = BTreeSet::new();
        for s in &self.sources {
            if s.id.is_empty() || s.id.contains(['/', '\\']) || !names.insert(s.id.clone()) {
                return err(format!("bad or duplicate source id `{}`", s.id));
            }
        }
        let mut names = BTreeSet::new();
        for c in &self.codecs {
            if !names.insert(c.name.clone()) || c.name.contains(['/', '\\']) {
                return err(format!("bad or duplicate codec `{}`", c.name));
            }
            match (&c.template, c.builtin) {
                (Some(t), None) => require_placeholders("codec", t, &["{input}", "{output}", "{bitrate_kbps}"])?,
                (None, Some(_)) => {}
                _ => return err(format!("codec `{}` needs exactly one of template or builtin", c.name)),
            }
            if let Some(t) = &c.decode_template {
                require_placeholders("decode", t, &["{input}", "{output}"])?;
            }
        }
        let mut names = BTreeSet::new();
        for s in &self.sr_methods {
            if s.name == NO_SR || !names.insert(s.name.clone()) || s.name.contains(['/', '\\']) {
                return err(format!("bad or duplicate SR method `{}`", s.name));
            }
            match (&s.template, s.builtin) {
                (Some(t), None) => require_placeholders("SR", t, &["{in_dir}", "{out_dir}"])?,
                (None, Some(_)) => {}
                _ => return err(format!("SR method `{}` needs exactly one of template or builtin", s.name)),
            }
            if !matches!(s.scale, 2 | 4) || s.scale > self.downscale_factor {
                return err(format!("SR method `{}`: scale {} does not fit downscale {}", s.name, s.scale, self.downscale_factor));
            }
        }
        if self.metrics.contains(&MetricName::Vmaf) && self.providers.vmaf.is_none() {
            return err("the vmaf metric needs a [providers.vmaf] entry".into());
        }
        match self.rd_quality_metric {
            MetricName::Lpips | MetricName::SiTi | MetricName::Colorfulness => {
                return err(format!("rd_quality_metric `{}` is not a quality score", self.rd_quality_metric.column()));
            }
            m if !self.metrics.contains(&m) => {
                return err(format!("rd_quality_metric `{}` is not in metrics", m.column()));
            }
            _ => {}
        }
        if let Some(st) = &self.study {
            if st.crop_width == 0 || st.crop_height == 0 {
                return err("empty study crop".into());
            }
        }
        Ok(())
    }

    /// Worker count after the environment override.
    pub fn worker_budget(&self) -> usize {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .or(self.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// SR method names in report order, with the No SR path last when enabled.
    pub fn method_names(&self) -> Vec<String> {
        let mut out: Vec<String> = self.sr_methods.iter().map(|s| s.name.clone()).collect();
        if self.include_no_sr {
            out.push(NO_SR.to_owned());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
output_dir = "out"

[[sources]]
id = "clip1"
path = "clip1.y4m"

[[codecs]]
name = "copy"
builtin = "copy"

[[sr_methods]]
name = "bicubic"
builtin = "bicubic"
"#;

    #[test]
    fn minimal_defaults() {
        let c = PipelineConfig::from_toml_str(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(c.target_bitrates_kbps, DEFAULT_BITRATES_KBPS.to_vec());
        assert_eq!(c.study_bitrates_kbps, vec![600.0, 1000.0, 2000.0]);
        assert_eq!(c.sources[0].path, Path::new("/data/clip1.y4m"));
        assert_eq!(c.output_dir, Path::new("/data/out"));
        assert_eq!(c.codecs[0].preset, "medium");
        assert_eq!(c.method_names(), vec!["bicubic".to_string(), NO_SR.into()]);
    }

    #[test]
    fn template_placeholders_are_checked() {
        let bad = MINIMAL.replace("builtin = \"copy\"", "template = \"x264 -o {output} {input}\"");
        let e = PipelineConfig::from_toml_str(&bad, Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("{bitrate_kbps}"), "{e}");
        let bad = MINIMAL.replace("builtin = \"bicubic\"", "template = \"sr {in_dir}\"");
        assert!(PipelineConfig::from_toml_str(&bad, Path::new(".")).is_err());
    }

    #[test]
    fn bitrates_must_ascend() {
        let bad = MINIMAL.replace("output_dir = \"out\"", "output_dir = \"out\"\ntarget_bitrates_kbps = [300.0, 100.0]\nstudy_bitrates_kbps = []");
        assert!(PipelineConfig::from_toml_str(&bad, Path::new(".")).is_err());
        let bad = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(PipelineConfig::from_toml_str(&bad, Path::new(".")).is_err());
        let bad = MINIMAL.replace("output_dir = \"out\"", "output_dir = \"out\"\nmystery = 3");
        assert!(PipelineConfig::from_toml_str(&bad, Path::new(".")).is_err());
    }

    #[test]
    fn worker_override() {
        let mut c = PipelineConfig::from_toml_str(MINIMAL, Path::new(".")).unwrap();
        c.workers = Some(3);
        // the variable is process-global; only read it here
        if std::env::var(WORKERS_ENV).is_err() {
            assert_eq!(c.worker_budget(), 3);
        }
    }
}
