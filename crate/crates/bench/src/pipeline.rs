//! Staged job runner: source, downscale, encode, SR, metrics, study crops.
//!
//! Stages run one after another; jobs inside a stage run on a bounded rayon
//! pool. Every job key chains the output hash of its upstream job, so a
//! changed input invalidates everything below it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use srvqa_core::erqa::{erqa_clip, ErqaParams};
use srvqa_core::fusion::FeatureVector;
use srvqa_core::media::{
    bicubic_resize, convert_color, crop, read_png_sequence, read_y4m_file, write_y4m_file, PixelFormat, Region, VideoClip,
};
use srvqa_core::metrics::{colorfulness, ms_ssim, psnr, si_ti};
use srvqa_core::neural::{lpips_distance, mdtvsfa_score, saliency, vmaf_adapter};

use crate::adapters::{encode_adapter, format_number, sr_adapter, ToolOutput, FRAME_PATTERN};
use crate::cache::{content_hash, JobCache, JobRecord, JobStatus, KeyBuilder};
use crate::config::{MetricName, PipelineConfig, Providers, NO_SR};
use crate::error::{BenchError, Result};
use crate::report::{assemble_report, write_report_bundle, write_training_table, BenchReport};

/// Equivalent FFmpeg invocation of the built-in downscale, recorded in reports.
pub const DOWNSCALE_COMMAND: &str =
    "builtin bicubic (Catmull-Rom, a = -0.5) per plane; equivalent: ffmpeg -i {input} -vf scale=iw/{factor}:ih/{factor}:flags=bicubic {output}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub stage: String,
    pub label: String,
    pub error: String,
    #[serde(default)]
    pub stderr: String,
}

/// Metric values for one distorted clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub clip: String,
    pub codec: String,
    pub method: String,
    pub target_bitrate_kbps: f64,
    pub achieved_bitrate_kbps: f64,
    pub metrics: BTreeMap<String, f64>,
    /// Present when every base feature was computed.
    pub features: Option<FeatureVector>,
}

impl MetricRow {
    /// "method + codec", the label subjective scores and rank tables use.
    pub fn label(&self) -> String {
        pair_label(&self.method, &self.codec)
    }
}

pub fn pair_label(method: &str, codec: &str) -> String {
    format!("{method} + {codec}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRecord {
    pub clip: String,
    pub codec: String,
    pub method: String,
    pub bitrate_kbps: f64,
    pub region: Region,
    /// Relative to the output directory.
    pub path: PathBuf,
}

/// Job counts by stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobPlan {
    pub sources: usize,
    pub downscale: usize,
    pub encode: usize,
    pub sr: usize,
    pub metrics: usize,
    pub saliency: usize,
    pub crops: usize,
}

impl JobPlan {
    pub fn total(&self) -> usize {
        self.sources + self.downscale + self.encode + self.sr + self.metrics + self.saliency + self.crops
    }
}

pub fn plan_jobs(cfg: &PipelineConfig) -> JobPlan {
    let clips = cfg.sources.len();
    let ladders = clips * cfg.codecs.len() * cfg.target_bitrates_kbps.len();
    let sr = ladders * cfg.sr_methods.len();
    let native = if cfg.include_no_sr { ladders } else { 0 };
    let lowres = if cfg.sr_methods.is_empty() { 0 } else { ladders };
    let methods = cfg.method_names().len();
    let (saliency, crops) = match &cfg.study {
        Some(_) => (clips, clips * cfg.codecs.len() * cfg.study_bitrates_kbps.len() * methods),
        None => (0, 0),
    };
    JobPlan {
        sources: clips,
        downscale: if lowres > 0 { clips } else { 0 },
        encode: lowres + native,
        sr,
        metrics: sr + native,
        saliency,
        crops,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub jobs: usize,
    pub cache_hits: usize,
    pub executed: usize,
    pub failed: usize,
    pub skipped_upstream: usize,
}

impl RunStats {
    pub fn hit_rate(&self) -> f64 {
        if self.jobs == 0 {
            1.0
        } else {
            self.cache_hits as f64 / self.jobs as f64
        }
    }
}

pub struct BenchRun {
    pub report: BenchReport,
    pub stats: RunStats,
    pub report_dir: PathBuf,
}

struct Produced {
    artifacts: Vec<PathBuf>,
    output_hash: String,
    result: Value,
    tool: Vec<ToolOutput>,
}

impl Produced {
    fn of(path: PathBuf, result: Value, tool: Vec<ToolOutput>) -> Result<Produced> {
        Ok(Produced {
            output_hash: content_hash(&path)?,
            artifacts: vec![path],
            result,
            tool,
        })
    }
}

struct Runner<'a> {
    cache: &'a JobCache,
    failures: Mutex<Vec<FailureRecord>>,
    jobs: std::sync::atomic::AtomicUsize,
    skipped: std::sync::atomic::AtomicUsize,
}

impl Runner<'_> {
    fn run(&self, stage: &'static str, label: &str, key: String, f: impl FnOnce() -> Result<Produced>) -> Option<JobRecord> {
        use std::sync::atomic::Ordering;
        self.jobs.fetch_add(1, Ordering::Relaxed);
        if let Some(rec) = self.cache.lookup(&key) {
            log::debug!("{stage} {label}: cache hit");
            self.cache.note_hit();
            return Some(rec);
        }
        self.cache.note_executed();
        let start = Instant::now();
        let outcome = f();
        let wall_time_secs = start.elapsed().as_secs_f64();
        let mut rec = JobRecord {
            key,
            stage: stage.to_owned(),
            label: label.to_owned(),
            status: JobStatus::Done,
            artifacts: Vec::new(),
            output_hash: String::new(),
            result: Value::Null,
            stdout: String::new(),
            stderr: String::new(),
            error: None,
            wall_time_secs,
        };
        match outcome {
            Ok(p) => {
                rec.artifacts = p.artifacts;
                rec.output_hash = p.output_hash;
                rec.result = p.result;
                rec.stdout = p.tool.iter().map(|t| t.stdout.as_str()).collect();
                rec.stderr = p.tool.iter().map(|t| t.stderr.as_str()).collect();
                if let Err(e) = self.cache.store(&rec) {
                    log::warn!("{stage} {label}: cannot store job record: {e}");
                }
                log::info!("{stage} {label}: done in {wall_time_secs:.2} s");
                Some(rec)
            }
            Err(e) => {
                log::error!("{stage} {label}: {e}");
                rec.status = JobStatus::Failed;
                rec.error = Some(e.to_string());
                if let BenchError::ToolFailed { stderr, .. } = &e {
                    rec.stderr = stderr.clone();
                }
                let _ = self.cache.store(&rec);
                self.failures.lock().unwrap().push(FailureRecord {
                    stage: stage.to_owned(),
                    label: label.to_owned(),
                    error: e.to_string(),
                    stderr: rec.stderr,
                });
                None
            }
        }
    }

    fn upstream_failed(&self, stage: &'static str, label: &str) {
        self.skipped.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        self.failures.lock().unwrap().push(FailureRecord {
            stage: stage.to_owned(),
            label: label.to_owned(),
            error: BenchError::UpstreamFailed {
                stage,
                label: label.to_owned(),
            }
            .to_string(),
            stderr: String::new(),
        });
    }
}

fn load_source(path: &Path) -> Result<VideoClip> {
    let clip = if path.is_dir() {
        read_png_sequence(path, FRAME_PATTERN)?
    } else {
        read_y4m_file(path)?
    };
    if clip.format() == PixelFormat::Rgb {
        Ok(clip.map_frames(|f| convert_color(f, PixelFormat::Yuv444))?)
    } else {
        Ok(clip)
    }
}

fn downscale(clip: &VideoClip, factor: usize) -> Result<VideoClip> {
    let (w, h) = (clip.width(), clip.height());
    if w % factor != 0 || h % factor != 0 {
        return Err(BenchError::Config(format!("{w}x{h} is not divisible by the downscale factor {factor}")));
    }
    let (lw, lh) = (w / factor, h / factor);
    let target = if clip.format() == PixelFormat::Yuv420 && (lw % 2 != 0 || lh % 2 != 0) {
        PixelFormat::Yuv444
    } else {
        clip.format()
    };
    Ok(clip.map_frames(|f| bicubic_resize(&convert_color(f, target)?, lw, lh))?)
}

#[derive(Clone)]
struct SourceInfo {
    id: String,
    y4m: PathBuf,
    hash: String,
    duration_secs: f64,
}

#[derive(Clone)]
enum Distorted {
    Frames(PathBuf),
    Y4m(PathBuf),
}

#[derive(Clone)]
struct DistJob {
    clip: usize,
    codec: usize,
    bitrate: f64,
    method: String,
    dist: Distorted,
    hash: String,
    achieved_kbps: f64,
}

impl DistJob {
    fn label(&self, cfg: &PipelineConfig) -> String {
        format!(
            "{}/{}/{}/{}",
            cfg.sources[self.clip].id,
            cfg.codecs[self.codec].name,
            format_number(self.bitrate),
            self.method
        )
    }

    fn load(&self) -> Result<VideoClip> {
        let clip = match &self.dist {
            Distorted::Frames(d) => read_png_sequence(d, FRAME_PATTERN)?,
            Distorted::Y4m(p) => read_y4m_file(p)?,
        };
        Ok(clip.with_bitrate(Some(self.achieved_kbps)))
    }
}

fn compute_metrics(
    cfg: &PipelineConfig,
    providers: &Providers,
    reference: &VideoClip,
    ref_path: &Path,
    job: &DistJob,
    scratch: &Path,
) -> Result<MetricRow> {
    let dist = job.load()?;
    let mut m = BTreeMap::new();
    let erqa_params = erqa_params(cfg);
    for name in &cfg.metrics {
        match name {
            MetricName::Psnr => {
                m.insert("psnr".to_owned(), psnr(reference, &dist)?.value);
            }
            MetricName::MsSsim => {
                m.insert("ms_ssim".to_owned(), ms_ssim(reference, &dist)?.value);
            }
            MetricName::Erqa => {
                m.insert("erqa".to_owned(), erqa_clip(reference, &dist, &erqa_params)?.value);
            }
            MetricName::Lpips => {
                m.insert("lpips".to_owned(), lpips_distance(&providers.lpips, reference, &dist)?.value);
            }
            MetricName::Mdtvsfa => {
                m.insert("mdtvsfa".to_owned(), mdtvsfa_score(&providers.mdtvsfa, &dist)?.value);
            }
            MetricName::SiTi => {
                let st = si_ti(&dist);
                m.insert("si".to_owned(), st.si);
                m.insert("ti".to_owned(), st.ti);
            }
            MetricName::Colorfulness => {
                m.insert("colorfulness".to_owned(), colorfulness(&dist).value);
            }
            MetricName::Vmaf => {
                let h = providers
                    .vmaf
                    .as_ref()
                    .ok_or_else(|| BenchError::Config("vmaf metric needs a vmaf provider".into()))?;
                let dist_path = match &job.dist {
                    Distorted::Y4m(p) => p.clone(),
                    Distorted::Frames(_) => {
                        std::fs::create_dir_all(scratch)?;
                        let p = scratch.join(format!("{}.y4m", job.method));
                        write_y4m_file(&dist.map_frames(|f| convert_color(f, reference.format()))?, &p)?;
                        p
                    }
                };
                m.insert("vmaf".to_owned(), vmaf_adapter(h, ref_path, &dist_path)?.value);
            }
        }
    }
    let features = match (m.get("erqa"), m.get("lpips"), m.get("mdtvsfa"), m.get("si"), m.get("ti"), m.get("colorfulness")) {
        (Some(&e), Some(&l), Some(&md), Some(&si), Some(&ti), Some(&c)) => {
            Some(FeatureVector::from_base(e, l, md, si, ti, c, job.achieved_kbps))
        }
        _ => None,
    };
    Ok(MetricRow {
        clip: cfg.sources[job.clip].id.clone(),
        codec: cfg.codecs[job.codec].name.clone(),
        method: job.method.clone(),
        target_bitrate_kbps: job.bitrate,
        achieved_bitrate_kbps: job.achieved_kbps,
        metrics: m,
        features,
    })
}

fn erqa_params(cfg: &PipelineConfig) -> ErqaParams {
    cfg.erqa_shift_radius.map(ErqaParams::with_shift_radius).unwrap_or_default()
}

/// Everything the metrics stage depends on besides its two inputs.
fn metrics_key_base(cfg: &PipelineConfig, providers: &Providers) -> KeyBuilder {
    let names: Vec<&str> = cfg.metrics.iter().map(|m| m.column()).collect();
    let mut k = KeyBuilder::new("metrics")
        .field("metrics", names.join(","))
        .field("erqa", erqa_params(cfg).label());
    for (name, hash) in providers.hashes() {
        k = k.field(&name, hash);
    }
    k
}

pub(crate) fn bitrate_dir(b: f64) -> String {
    format_number(b)
}

/// Run the whole benchmark and write the report bundle under `output_dir/report`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<BenchRun> {
    let out = &cfg.output_dir;
    let work = out.join("work");
    std::fs::create_dir_all(&work)?;
    let cache = JobCache::open(&out.join("cache"))?;
    let providers = cfg.providers.resolve()?;
    let workers = cfg.worker_budget();
    log::info!("running with {workers} workers");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start worker pool: {e}")))?;
    let runner = Runner {
        cache: &cache,
        failures: Mutex::new(Vec::new()),
        jobs: Default::default(),
        skipped: Default::default(),
    };
    let rows = pool.install(|| stages(cfg, &providers, &runner, &work))?;
    let (rows, crops) = rows;

    let mut failures = runner.failures.into_inner().unwrap();
    failures.sort_by(|a, b| (&a.stage, &a.label).cmp(&(&b.stage, &b.label)));
    let report = assemble_report(cfg, &providers, rows, crops, failures)?;
    let report_dir = out.join("report");
    write_report_bundle(&report, &report_dir)?;
    write_training_table(cfg, &report, &report_dir)?;
    let stats = RunStats {
        jobs: runner.jobs.into_inner(),
        cache_hits: cache.hits(),
        executed: cache.executed(),
        failed: report.failures.len() - runner.skipped.load(std::sync::atomic::Ordering::Relaxed),
        skipped_upstream: runner.skipped.into_inner(),
    };
    std::fs::write(out.join("run.json"), serde_json::to_string_pretty(&stats)?)?;
    Ok(BenchRun {
        report,
        stats,
        report_dir,
    })
}

type StageOutput = (Vec<MetricRow>, Vec<CropRecord>);

fn stages(cfg: &PipelineConfig, providers: &Providers, runner: &Runner, work: &Path) -> Result<StageOutput> {
    let factor = cfg.downscale_factor;

    // sources
    let sources: Vec<Option<SourceInfo>> = cfg
        .sources
        .par_iter()
        .map(|s| {
            let input_hash = match content_hash(&s.path) {
                Ok(h) => h,
                Err(e) => {
                    runner.failures.lock().unwrap().push(FailureRecord {
                        stage: "source".into(),
                        label: s.id.clone(),
                        error: e.to_string(),
                        stderr: String::new(),
                    });
                    return None;
                }
            };
            let dir = work.join(&s.id);
            let key = KeyBuilder::new("source").field("input", &input_hash).field("slot", &s.id).finish();
            let rec = runner.run("source", &s.id, key, || {
                std::fs::create_dir_all(&dir)?;
                let clip = load_source(&s.path)?;
                let y4m = dir.join("source.y4m");
                write_y4m_file(&clip, &y4m)?;
                Produced::of(
                    y4m,
                    json!({"width": clip.width(), "height": clip.height(), "frames": clip.len(), "duration_secs": clip.duration_secs()}),
                    Vec::new(),
                )
            })?;
            Some(SourceInfo {
                id: s.id.clone(),
                y4m: rec.artifacts[0].clone(),
                hash: rec.output_hash.clone(),
                duration_secs: rec.result["duration_secs"].as_f64().unwrap_or(0.0),
            })
        })
        .collect();

    // downscale
    let need_lowres = !cfg.sr_methods.is_empty();
    let lowres: Vec<Option<(PathBuf, String)>> = sources
        .par_iter()
        .enumerate()
        .map(|(i, src)| {
            if !need_lowres {
                return None;
            }
            let label = cfg.sources[i].id.clone();
            let Some(src) = src else {
                runner.upstream_failed("downscale", &label);
                return None;
            };
            let key = KeyBuilder::new("downscale")
                .field("source", &src.hash)
                .field("factor", factor.to_string())
                .field("command", DOWNSCALE_COMMAND)
                .field("slot", &label)
                .finish();
            let rec = runner.run("downscale", &label, key, || {
                let clip = read_y4m_file(&src.y4m)?;
                let small = downscale(&clip, factor)?;
                let path = work.join(&src.id).join("lowres.y4m");
                write_y4m_file(&small, &path)?;
                Produced::of(path, json!({"width": small.width(), "height": small.height()}), Vec::new())
            })?;
            Some((rec.artifacts[0].clone(), rec.output_hash))
        })
        .collect();

    // encode
    struct EncodeJob {
        clip: usize,
        codec: usize,
        bitrate: f64,
        native: bool,
    }
    let mut encode_jobs = Vec::new();
    for clip in 0..cfg.sources.len() {
        for codec in 0..cfg.codecs.len() {
            for &bitrate in &cfg.target_bitrates_kbps {
                if need_lowres {
                    encode_jobs.push(EncodeJob { clip, codec, bitrate, native: false });
                }
                if cfg.include_no_sr {
                    encode_jobs.push(EncodeJob { clip, codec, bitrate, native: true });
                }
            }
        }
    }
    let encoded: Vec<Option<(PathBuf, String, f64)>> = encode_jobs
        .par_iter()
        .map(|j| {
            let codec = &cfg.codecs[j.codec];
            let kind = if j.native { "native" } else { "lowres" };
            let label = format!("{}/{}/{}/{kind}", cfg.sources[j.clip].id, codec.name, format_number(j.bitrate));
            let Some(src) = &sources[j.clip] else {
                runner.upstream_failed("encode", &label);
                return None;
            };
            let input = if j.native {
                (src.y4m.clone(), src.hash.clone())
            } else {
                match &lowres[j.clip] {
                    Some(l) => l.clone(),
                    None => {
                        runner.upstream_failed("encode", &label);
                        return None;
                    }
                }
            };
            let key = KeyBuilder::new("encode")
                .field("codec", serde_json::to_string(codec).unwrap_or_default())
                .field("bitrate", format_number(j.bitrate))
                .field("kind", kind)
                .field("input", &input.1)
                .field("slot", &label)
                .finish();
            let dir = work.join(&src.id).join(&codec.name).join(bitrate_dir(j.bitrate)).join(kind);
            let rec = runner.run("encode", &label, key, || {
                if dir.exists() {
                    std::fs::remove_dir_all(&dir)?;
                }
                let e = encode_adapter(codec, &input.0, src.duration_secs, j.bitrate, &dir)?;
                let result = json!({"achieved_kbps": e.achieved_kbps});
                if j.native {
                    return Produced::of(e.decoded, result, e.tool);
                }
                let clip = read_y4m_file(&e.decoded)?.with_bitrate(Some(e.achieved_kbps));
                let frames = dir.join("frames");
                srvqa_core::media::write_png_sequence(&clip, &frames)?;
                let mut p = Produced::of(frames, result, e.tool)?;
                p.artifacts.push(e.decoded);
                Ok(p)
            })?;
            let achieved = rec.result["achieved_kbps"].as_f64().unwrap_or(0.0);
            Some((rec.artifacts[0].clone(), rec.output_hash, achieved))
        })
        .collect();
    let encode_index: BTreeMap<(usize, usize, u64, bool), usize> = encode_jobs
        .iter()
        .enumerate()
        .map(|(i, j)| ((j.clip, j.codec, j.bitrate.to_bits(), j.native), i))
        .collect();
    let encoded_of = |clip: usize, codec: usize, bitrate: f64, native: bool| {
        encode_index
            .get(&(clip, codec, bitrate.to_bits(), native))
            .and_then(|&i| encoded[i].clone())
    };

    // SR
    let mut sr_jobs = Vec::new();
    for clip in 0..cfg.sources.len() {
        for codec in 0..cfg.codecs.len() {
            for &bitrate in &cfg.target_bitrates_kbps {
                for sr in 0..cfg.sr_methods.len() {
                    sr_jobs.push((clip, codec, bitrate, sr));
                }
            }
        }
    }
    let mut dist_jobs: Vec<DistJob> = sr_jobs
        .par_iter()
        .filter_map(|&(clip, codec, bitrate, sr)| {
            let spec = &cfg.sr_methods[sr];
            let label = format!(
                "{}/{}/{}/{}",
                cfg.sources[clip].id,
                cfg.codecs[codec].name,
                format_number(bitrate),
                spec.name
            );
            let Some((frames, hash, achieved)) = encoded_of(clip, codec, bitrate, false) else {
                runner.upstream_failed("sr", &label);
                return None;
            };
            let key = KeyBuilder::new("sr")
                .field("method", serde_json::to_string(spec).unwrap_or_default())
                .field("scale", factor.to_string())
                .field("input", &hash)
                .field("slot", &label)
                .finish();
            let out_dir = work
                .join(&cfg.sources[clip].id)
                .join(&cfg.codecs[codec].name)
                .join(bitrate_dir(bitrate))
                .join("sr")
                .join(&spec.name);
            let rec = runner.run("sr", &label, key, || {
                let o = sr_adapter(spec, &frames, &out_dir, factor)?;
                Produced::of(out_dir.clone(), json!({"frames": o.frames, "passes": o.passes}), o.tool)
            })?;
            Some(DistJob {
                clip,
                codec,
                bitrate,
                method: spec.name.clone(),
                dist: Distorted::Frames(rec.artifacts[0].clone()),
                hash: rec.output_hash,
                achieved_kbps: achieved,
            })
        })
        .collect();
    if cfg.include_no_sr {
        for clip in 0..cfg.sources.len() {
            for codec in 0..cfg.codecs.len() {
                for &bitrate in &cfg.target_bitrates_kbps {
                    if let Some((path, hash, achieved)) = encoded_of(clip, codec, bitrate, true) {
                        dist_jobs.push(DistJob {
                            clip,
                            codec,
                            bitrate,
                            method: NO_SR.to_owned(),
                            dist: Distorted::Y4m(path),
                            hash,
                            achieved_kbps: achieved,
                        });
                    }
                }
            }
        }
    }

    // metrics
    let references: Vec<OnceLock<Option<Arc<VideoClip>>>> = (0..cfg.sources.len()).map(|_| OnceLock::new()).collect();
    let reference = |clip: usize| -> Option<Arc<VideoClip>> {
        references[clip]
            .get_or_init(|| {
                let src = sources[clip].as_ref()?;
                read_y4m_file(&src.y4m).ok().map(Arc::new)
            })
            .clone()
    };
    let key_base = metrics_key_base(cfg, providers);
    let mut rows: Vec<MetricRow> = dist_jobs
        .par_iter()
        .filter_map(|j| {
            let label = j.label(cfg);
            let src = sources[j.clip].as_ref()?;
            let key = key_base
                .clone()
                .field("reference", &src.hash)
                .field("distorted", &j.hash)
                .field("achieved_kbps", j.achieved_kbps.to_string())
                .field("slot", &label)
                .finish();
            let scratch = work
                .join(&src.id)
                .join(&cfg.codecs[j.codec].name)
                .join(bitrate_dir(j.bitrate))
                .join("metrics");
            let rec = runner.run("metrics", &label, key, || {
                let r = reference(j.clip).ok_or_else(|| BenchError::Config(format!("cannot reload source `{}`", src.id)))?;
                let row = compute_metrics(cfg, providers, &r, &src.y4m, j, &scratch)?;
                let value = serde_json::to_value(&row)?;
                Ok(Produced {
                    artifacts: Vec::new(),
                    output_hash: KeyBuilder::new("row").field("value", value.to_string()).finish(),
                    result: value,
                    tool: Vec::new(),
                })
            })?;
            serde_json::from_value(rec.result).ok()
        })
        .collect();
    rows.sort_by(|a, b| {
        (&a.clip, &a.codec, &a.method)
            .cmp(&(&b.clip, &b.codec, &b.method))
            .then(a.target_bitrate_kbps.total_cmp(&b.target_bitrate_kbps))
    });

    let crops = match &cfg.study {
        Some(study) => study_crops(cfg, providers, runner, &sources, &dist_jobs, (study.crop_width, study.crop_height)),
        None => Vec::new(),
    };
    Ok((rows, crops))
}

/// Saliency-centered crops of every method's output at the study bitrates.
/// All methods of one clip share the clip's region.
fn study_crops(
    cfg: &PipelineConfig,
    providers: &Providers,
    runner: &Runner,
    sources: &[Option<SourceInfo>],
    dist_jobs: &[DistJob],
    (cw, ch): (usize, usize),
) -> Vec<CropRecord> {
    let crops_dir = cfg.output_dir.join("crops");
    let regions: Vec<Option<Region>> = sources
        .par_iter()
        .enumerate()
        .map(|(i, src)| {
            let label = cfg.sources[i].id.clone();
            let Some(src) = src else {
                runner.upstream_failed("saliency", &label);
                return None;
            };
            let key = KeyBuilder::new("saliency")
                .field("provider", providers.saliency.provider_hash())
                .field("source", &src.hash)
                .field("crop", format!("{cw}x{ch}"))
                .field("slot", &label)
                .finish();
            let rec = runner.run("saliency", &label, key, || {
                let clip = read_y4m_file(&src.y4m)?;
                let map = saliency(&providers.saliency, &clip)?;
                let region = map.crop_region(cw, ch)?;
                let dir = crops_dir.join(&src.id);
                std::fs::create_dir_all(&dir)?;
                let path = dir.join("reference.y4m");
                write_crop(&clip, &region, &path)?;
                Produced::of(path, serde_json::to_value(region)?, Vec::new())
            })?;
            serde_json::from_value(rec.result).ok()
        })
        .collect();

    let study: Vec<&DistJob> = dist_jobs
        .iter()
        .filter(|j| cfg.study_bitrates_kbps.contains(&j.bitrate))
        .collect();
    let mut out: Vec<CropRecord> = study
        .par_iter()
        .filter_map(|j| {
            let label = j.label(cfg);
            let Some(region) = regions[j.clip] else {
                runner.upstream_failed("crop", &label);
                return None;
            };
            let clip_id = &cfg.sources[j.clip].id;
            let codec = &cfg.codecs[j.codec].name;
            let rel = PathBuf::from("crops")
                .join(clip_id)
                .join(codec)
                .join(bitrate_dir(j.bitrate))
                .join(format!("{}.y4m", j.method));
            let key = KeyBuilder::new("crop")
                .field("region", serde_json::to_string(&region).unwrap_or_default())
                .field("distorted", &j.hash)
                .field("slot", &label)
                .finish();
            let path = cfg.output_dir.join(&rel);
            runner.run("crop", &label, key, || {
                std::fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))?;
                write_crop(&j.load()?, &region, &path)?;
                Produced::of(path.clone(), Value::Null, Vec::new())
            })?;
            Some(CropRecord {
                clip: clip_id.clone(),
                codec: codec.clone(),
                method: j.method.clone(),
                bitrate_kbps: j.bitrate,
                region,
                path: rel,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        (&a.clip, &a.codec, &a.method)
            .cmp(&(&b.clip, &b.codec, &b.method))
            .then(a.bitrate_kbps.total_cmp(&b.bitrate_kbps))
    });
    out
}

/// Crops are stored as 4:4:4 so any offset is representable.
fn write_crop(clip: &VideoClip, region: &Region, path: &Path) -> Result<()> {
    let full = clip.map_frames(|f| convert_color(f, PixelFormat::Yuv444))?;
    write_y4m_file(&crop(&full, region)?, path)?;
    Ok(())
}
