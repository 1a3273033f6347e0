//! Report assembly over finished jobs, the on-disk bundle and its validation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srvqa_core::analysis::{
    average_bsq, bsq_rate, rank_table, write_json, Averaging, BsqResult, BsqTable, MetricColumn, RDCurve, RankEntry, RankTable,
};
use srvqa_core::fusion::{write_feature_table, TrainingSample};
use srvqa_core::media::Region;

use crate::config::{PipelineConfig, Providers, NO_SR, SCHEMA_VERSION};
use crate::error::{BenchError, Result};
use crate::pipeline::{pair_label, CropRecord, FailureRecord, MetricRow, DOWNSCALE_COMMAND};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdCurveRecord {
    pub clip: String,
    pub codec: String,
    pub method: String,
    pub quality_metric: String,
    /// (target bitrate kbps, quality), ascending bitrate.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsqEntry {
    pub clip: String,
    pub codec: String,
    pub method: String,
    pub result: Option<BsqResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub seed: u64,
    pub downscale_factor: usize,
    pub downscale_command: String,
    pub color_convention: String,
    pub provider_hashes: BTreeMap<String, String>,
    pub clips: Vec<String>,
    pub codecs: Vec<String>,
    pub methods: Vec<String>,
    pub target_bitrates_kbps: Vec<f64>,
    pub metric_columns: Vec<String>,
    pub rows: Vec<MetricRow>,
    pub rd_curves: Vec<RdCurveRecord>,
    pub bsq: Vec<BsqEntry>,
    pub bsq_table: Option<BsqTable>,
    /// "subjective" or the metric used in its place.
    pub rank_score: String,
    pub rank_table: Option<RankTable>,
    pub crop_regions: BTreeMap<String, Region>,
    pub crops: Vec<CropRecord>,
    pub failures: Vec<FailureRecord>,
}

#[derive(Debug, Deserialize)]
struct SubjectiveRow {
    clip: String,
    label: String,
    score: f64,
}

fn read_subjective(path: &Path) -> Result<BTreeMap<(String, String), f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for r in rdr.deserialize::<SubjectiveRow>() {
        let r = r.map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        out.insert((r.clip, r.label), r.score);
    }
    Ok(out)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn metric_columns(cfg: &PipelineConfig) -> Vec<String> {
    let mut out = Vec::new();
    for m in &cfg.metrics {
        match m.column() {
            "si_ti" => out.extend(["si".to_owned(), "ti".to_owned()]),
            c => out.push(c.to_owned()),
        }
    }
    out
}

pub fn assemble_report(
    cfg: &PipelineConfig,
    providers: &Providers,
    rows: Vec<MetricRow>,
    crops: Vec<CropRecord>,
    failures: Vec<FailureRecord>,
) -> Result<BenchReport> {
    let methods = cfg.method_names();
    let codecs: Vec<String> = cfg.codecs.iter().map(|c| c.name.clone()).collect();
    let clips: Vec<String> = cfg.sources.iter().map(|s| s.id.clone()).collect();
    let quality = cfg.rd_quality_metric.column().to_owned();

    let mut rd_curves = Vec::new();
    for clip in &clips {
        for codec in &codecs {
            for method in &methods {
                let points: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| &r.clip == clip && &r.codec == codec && &r.method == method)
                    .filter_map(|r| r.metrics.get(&quality).map(|&q| (r.target_bitrate_kbps, q)))
                    .collect();
                if !points.is_empty() {
                    rd_curves.push(RdCurveRecord {
                        clip: clip.clone(),
                        codec: codec.clone(),
                        method: method.clone(),
                        quality_metric: quality.clone(),
                        points,
                    });
                }
            }
        }
    }

    let curve = |clip: &str, codec: &str, method: &str| {
        rd_curves
            .iter()
            .find(|c| c.clip == clip && c.codec == codec && c.method == method)
    };
    let mut bsq = Vec::new();
    if cfg.include_no_sr {
        for clip in &clips {
            for codec in &codecs {
                for method in &methods {
                    let (Some(t), Some(r)) = (curve(clip, codec, method), curve(clip, codec, NO_SR)) else {
                        continue;
                    };
                    let outcome = RDCurve::new(pair_label(method, codec), &t.points)
                        .and_then(|tc| RDCurve::new(pair_label(NO_SR, codec), &r.points).and_then(|rc| bsq_rate(&tc, &rc)));
                    let (result, error) = match outcome {
                        Ok(b) => (Some(b), None),
                        Err(e) => {
                            log::warn!("BSQ-rate {clip} {method} + {codec}: {e}");
                            (None, Some(e.to_string()))
                        }
                    };
                    bsq.push(BsqEntry {
                        clip: clip.clone(),
                        codec: codec.clone(),
                        method: method.clone(),
                        result,
                        error,
                    });
                }
            }
        }
    }
    let bsq_table = cfg.include_no_sr.then(|| {
        let values = methods
            .iter()
            .map(|m| {
                codecs
                    .iter()
                    .map(|c| {
                        let v: Vec<f64> = bsq
                            .iter()
                            .filter(|e| &e.method == m && &e.codec == c)
                            .filter_map(|e| e.result.as_ref().map(|r| r.bsq_rate))
                            .collect();
                        average_bsq(&v, Averaging::Arithmetic).ok()
                    })
                    .collect()
            })
            .collect();
        BsqTable {
            codecs: codecs.clone(),
            methods: methods.clone(),
            values,
            details: bsq.iter().filter_map(|e| e.result.clone()).collect(),
        }
    });

    let columns = metric_columns(cfg);
    let subjective = cfg.subjective_scores.as_deref().map(read_subjective).transpose()?;
    let rank_score = if subjective.is_some() { "subjective".to_owned() } else { quality.clone() };
    let mut entries = Vec::new();
    for method in &methods {
        for codec in &codecs {
            let label = pair_label(method, codec);
            let mine: Vec<&MetricRow> = rows.iter().filter(|r| &r.method == method && &r.codec == codec).collect();
            if mine.is_empty() {
                continue;
            }
            let score = match &subjective {
                Some(s) => mean(&clips.iter().filter_map(|c| s.get(&(c.clone(), label.clone())).copied()).collect::<Vec<_>>()),
                None => mean(&mine.iter().filter_map(|r| r.metrics.get(&quality).copied()).collect::<Vec<_>>()),
            };
            let Some(score) = score else { continue };
            let metrics = columns
                .iter()
                .map(|c| mean(&mine.iter().filter_map(|r| r.metrics.get(c).copied()).collect::<Vec<_>>()))
                .collect();
            entries.push(RankEntry {
                label,
                subjective: score,
                metrics,
            });
        }
    }
    let rank_table = (!entries.is_empty()).then(|| {
        let cols: Vec<MetricColumn> = columns.iter().map(|c| MetricColumn::by_name(c)).collect();
        rank_table(&entries, &cols)
    });

    let mut crop_regions = BTreeMap::new();
    for c in &crops {
        crop_regions.entry(c.clip.clone()).or_insert(c.region);
    }

    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        downscale_factor: cfg.downscale_factor,
        downscale_command: DOWNSCALE_COMMAND.replace("{factor}", &cfg.downscale_factor.to_string()),
        color_convention: "YCbCr BT.601 limited range; RGB full range".into(),
        provider_hashes: providers.hashes(),
        clips,
        codecs,
        methods,
        target_bitrates_kbps: cfg.target_bitrates_kbps.clone(),
        metric_columns: columns,
        rows,
        rd_curves,
        bsq,
        bsq_table,
        rank_score,
        rank_table,
        crop_regions,
        crops,
        failures,
    })
}

/// Rows with subjective scores, as a fusion training table.
pub fn training_samples(report: &BenchReport, scores: &BTreeMap<(String, String), f64>) -> Vec<TrainingSample> {
    report
        .rows
        .iter()
        .filter_map(|r| {
            let s = scores.get(&(r.clip.clone(), r.label()))?;
            Some(TrainingSample {
                features: r.features?,
                subjective_score: *s,
                group_id: r.clip.clone(),
            })
        })
        .collect()
}

fn write_rows_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["clip", "codec", "method", "target_bitrate_kbps", "achieved_bitrate_kbps"];
    header.extend(report.metric_columns.iter().map(String::as_str));
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![
            r.clip.clone(),
            r.codec.clone(),
            r.method.clone(),
            r.target_bitrate_kbps.to_string(),
            r.achieved_bitrate_kbps.to_string(),
        ];
        rec.extend(
            report
                .metric_columns
                .iter()
                .map(|c| r.metrics.get(c).map_or(String::new(), |v| v.to_string())),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_failures_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["stage", "label", "error", "stderr"])
        ?;
    for f in &report.failures {
        w.write_record([&f.stage, &f.label, &f.error, &f.stderr])
            ?;
    }
    w.flush()?;
    Ok(())
}

pub const REPORT_FILE: &str = "report.json";

/// `report.json`, `rows.csv`, `failures.csv`, BSQ and rank tables.
pub fn write_report_bundle(report: &BenchReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let p = dir.join(REPORT_FILE);
    write_json(&p, report)?;
    written.push(p);
    let p = dir.join("rows.csv");
    write_rows_csv(report, &p)?;
    written.push(p);
    let p = dir.join("failures.csv");
    write_failures_csv(report, &p)?;
    written.push(p);
    if let Some(t) = &report.bsq_table {
        let p = dir.join("bsq.csv");
        t.write_csv(&p)?;
        written.push(p);
        let p = dir.join("bsq.md");
        std::fs::write(&p, t.to_markdown())?;
        written.push(p);
    }
    if let Some(t) = &report.rank_table {
        let p = dir.join("rank.csv");
        t.write_csv(&p)?;
        written.push(p);
        let p = dir.join("rank.md");
        std::fs::write(&p, t.to_markdown())?;
        written.push(p);
    }
    Ok(written)
}

/// Write the fusion training table when subjective scores are configured.
pub fn write_training_table(cfg: &PipelineConfig, report: &BenchReport, dir: &Path) -> Result<Option<PathBuf>> {
    let Some(path) = &cfg.subjective_scores else {
        return Ok(None);
    };
    let samples = training_samples(report, &read_subjective(path)?);
    if samples.is_empty() {
        return Ok(None);
    }
    let p = dir.join("features.csv");
    write_feature_table(&p, &samples)?;
    Ok(Some(p))
}

pub fn load_report(dir: &Path) -> Result<BenchReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(REPORT_FILE))?)?)
}

/// Structural checks on a report bundle rooted at `output_dir`.
pub fn validate_report(report: &BenchReport, output_dir: &Path) -> Result<()> {
    let bad = |m: String| Err(BenchError::InvalidReport(m));
    if report.schema_version != SCHEMA_VERSION {
        return bad(format!("schema_version {}", report.schema_version));
    }
    let mut seen = BTreeSet::new();
    for r in &report.rows {
        let key = (&r.clip, &r.codec, &r.method, r.target_bitrate_kbps.to_bits());
        if !seen.insert(key) {
            return bad(format!("duplicate row {} {} at {}", r.label(), r.clip, r.target_bitrate_kbps));
        }
        if let Some(c) = report.metric_columns.iter().find(|c| !r.metrics.contains_key(*c)) {
            return bad(format!("row {} {} lacks `{c}`", r.label(), r.clip));
        }
        if r.metrics.values().any(|v| !v.is_finite()) {
            return bad(format!("row {} {} has a non-finite metric", r.label(), r.clip));
        }
        if let Some(f) = &r.features {
            if !f.products_consistent() || f.bitrate_kbps != r.achieved_bitrate_kbps {
                return bad(format!("row {} {} has inconsistent features", r.label(), r.clip));
            }
        }
    }
    for c in &report.rd_curves {
        if c.points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return bad(format!("RD curve {} {} not ascending in bitrate", c.clip, c.method));
        }
    }
    for e in &report.bsq {
        match (&e.result, &e.error) {
            (Some(r), None) if r.bsq_rate > 0.0 && r.bsq_rate.is_finite() => {}
            (None, Some(_)) => {}
            _ => return bad(format!("BSQ entry {} {} {} malformed", e.clip, e.method, e.codec)),
        }
        if e.method == NO_SR {
            if let Some(r) = &e.result {
                if r.bsq_rate != 1.0 {
                    return bad(format!("No SR self BSQ-rate is {}", r.bsq_rate));
                }
            }
        }
    }
    for c in &report.crops {
        if report.crop_regions.get(&c.clip) != Some(&c.region) {
            return bad(format!("crop region of {} {} differs from the clip region", c.clip, c.method));
        }
        if !output_dir.join(&c.path).is_file() {
            return bad(format!("missing crop {}", c.path.display()));
        }
    }
    Ok(())
}
