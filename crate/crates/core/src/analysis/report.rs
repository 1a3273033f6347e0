//! Correlation reports and CSV / JSON / Markdown table writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bsq::BsqResult;
use super::correlation::{pearson, spearman};
use super::rank::{top3_markers, Direction, Marker, RankTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipCorrelation {
    pub clip: String,
    pub n: usize,
    pub plcc: f64,
    pub srcc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub metric: String,
    /// Mean over clips with a defined correlation.
    pub plcc: f64,
    pub srcc: f64,
    pub per_clip: Vec<ClipCorrelation>,
    /// Clips skipped because a side was constant or too short.
    pub skipped: Vec<String>,
}

/// One observation: clip id, metric value, subjective score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub clip: String,
    pub metric: f64,
    pub subjective: f64,
}

/// Per-clip PLCC/SRCC of a metric against subjective scores, then the mean.
pub fn correlation_report(metric: &str, observations: &[Observation]) -> Result<CorrelationReport> {
    let mut by_clip: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for o in observations {
        let e = by_clip.entry(o.clip.as_str()).or_default();
        e.0.push(o.metric);
        e.1.push(o.subjective);
    }
    let mut per_clip = Vec::new();
    let mut skipped = Vec::new();
    for (clip, (x, y)) in by_clip {
        match (pearson(&x, &y), spearman(&x, &y)) {
            (Ok(plcc), Ok(srcc)) => per_clip.push(ClipCorrelation {
                clip: clip.to_owned(),
                n: x.len(),
                plcc,
                srcc,
            }),
            (Err(e), _) | (_, Err(e)) => {
                log::warn!("{metric}: clip `{clip}` skipped: {e}");
                skipped.push(clip.to_owned());
            }
        }
    }
    if per_clip.is_empty() {
        return Err(Error::InsufficientData(format!("{metric}: no clip has a defined correlation")));
    }
    let n = per_clip.len() as f64;
    Ok(CorrelationReport {
        metric: metric.to_owned(),
        plcc: per_clip.iter().map(|c| c.plcc).sum::<f64>() / n,
        srcc: per_clip.iter().map(|c| c.srcc).sum::<f64>() / n,
        per_clip,
        skipped,
    })
}

fn fmt_value(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.decimals$}"))
}

fn cell(v: Option<f64>, m: Option<Marker>, decimals: usize) -> String {
    let s = fmt_value(v, decimals);
    match m {
        Some(m) if v.is_some() => m.wrap_markdown(&s),
        _ => s,
    }
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

impl RankTable {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Rank | Label | Subjective |");
        for c in &self.columns {
            let arrow = if c.direction == Direction::LowerIsBetter { "↓" } else { "↑" };
            let _ = write!(s, " {} {arrow} |", c.name);
        }
        s.push_str("\n|---|---|---|");
        s.push_str(&"---|".repeat(self.columns.len()));
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "| {} | {} | {} |", r.rank, r.label, cell(Some(r.subjective), r.subjective_marker, 3));
            for (v, m) in r.metrics.iter().zip(&r.metric_markers) {
                let _ = write!(s, " {} |", cell(*v, *m, 3));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["rank".to_owned(), "label".into(), "subjective".into()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![r.rank.to_string(), r.label.clone(), r.subjective.to_string()];
                row.extend(r.metrics.iter().map(|v| v.map_or(String::new(), |v| v.to_string())));
                row
            })
            .collect();
        write_rows(path, &header, &rows)
    }
}

/// Methods (rows) by codecs (columns) of averaged BSQ-rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsqTable {
    pub codecs: Vec<String>,
    pub methods: Vec<String>,
    /// `values[method][codec]`
    pub values: Vec<Vec<Option<f64>>>,
    /// Per-clip results the averages came from.
    pub details: Vec<BsqResult>,
}

impl BsqTable {
    pub fn markers(&self) -> Vec<Vec<Option<Marker>>> {
        let mut out = vec![vec![None; self.codecs.len()]; self.methods.len()];
        for c in 0..self.codecs.len() {
            let col: Vec<Option<f64>> = self.values.iter().map(|r| r[c]).collect();
            for (m, mark) in top3_markers(&col, Direction::LowerIsBetter).into_iter().enumerate() {
                out[m][c] = mark;
            }
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let marks = self.markers();
        let mut s = String::from("| SR \\ codec |");
        for c in &self.codecs {
            let _ = write!(s, " {c} |");
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(self.codecs.len()));
        s.push('\n');
        for (i, m) in self.methods.iter().enumerate() {
            let _ = write!(s, "| {m} |");
            for c in 0..self.codecs.len() {
                let _ = write!(s, " {} |", cell(self.values[i][c], marks[i][c], 3));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["method".to_owned()];
        header.extend(self.codecs.iter().cloned());
        let rows: Vec<Vec<String>> = self
            .methods
            .iter()
            .zip(&self.values)
            .map(|(m, vals)| {
                let mut row = vec![m.clone()];
                row.extend(vals.iter().map(|v| v.map_or(String::new(), |v| v.to_string())));
                row
            })
            .collect();
        write_rows(path, &header, &rows)
    }
}

pub fn correlations_markdown(reports: &[CorrelationReport]) -> String {
    let mut s = String::from("| Metric | PLCC | SRCC |\n|---|---|---|\n");
    let plcc = top3_markers(&reports.iter().map(|r| Some(r.plcc)).collect::<Vec<_>>(), Direction::HigherIsBetter);
    let srcc = top3_markers(&reports.iter().map(|r| Some(r.srcc)).collect::<Vec<_>>(), Direction::HigherIsBetter);
    for (i, r) in reports.iter().enumerate() {
        let _ = writeln!(s, "| {} | {} | {} |", r.metric, cell(Some(r.plcc), plcc[i], 3), cell(Some(r.srcc), srcc[i], 3));
    }
    s
}

pub fn write_correlations_csv(path: &Path, reports: &[CorrelationReport]) -> Result<()> {
    let header = ["metric", "plcc", "srcc", "clips"].map(str::to_owned);
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| vec![r.metric.clone(), r.plcc.to_string(), r.srcc.to_string(), r.per_clip.len().to_string()])
        .collect();
    write_rows(path, &header, &rows)
}

/// Pretty JSON of any report value.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::rank::{rank_table, MetricColumn, RankEntry};

    fn obs(clip: &str, m: f64, s: f64) -> Observation {
        Observation {
            clip: clip.into(),
            metric: m,
            subjective: s,
        }
    }

    #[test]
    fn per_clip_mean() {
        let o = vec![
            obs("a", 1.0, 1.0),
            obs("a", 2.0, 2.0),
            obs("a", 3.0, 3.0),
            obs("b", 1.0, 3.0),
            obs("b", 2.0, 2.0),
            obs("b", 3.0, 1.0),
            obs("c", 1.0, 1.0),
            obs("c", 1.0, 2.0),
        ];
        let r = correlation_report("psnr", &o).unwrap();
        assert_eq!(r.per_clip.len(), 2);
        assert!(r.plcc.abs() < 1e-12 && r.srcc.abs() < 1e-12);
        assert_eq!(r.skipped, vec!["c".to_string()]);
        assert!(correlation_report("x", &o[6..]).is_err());
    }

    #[test]
    fn markdown_marks_best() {
        let t = rank_table(
            &[
                RankEntry { label: "p".into(), subjective: 2.0, metrics: vec![Some(0.1)] },
                RankEntry { label: "q".into(), subjective: 1.0, metrics: vec![Some(0.2)] },
            ],
            &[MetricColumn::by_name("LPIPS")],
        );
        let md = t.to_markdown();
        assert!(md.contains("| 1 | p | **2.000** | **0.100** |"), "{md}");
        assert!(md.contains("LPIPS ↓"));
    }

    #[test]
    fn csv_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let table = BsqTable {
            codecs: vec!["x264".into()],
            methods: vec!["No SR".into(), "bicubic".into()],
            values: vec![vec![Some(1.0)], vec![None]],
            details: vec![],
        };
        table.write_csv(&dir.path().join("bsq.csv")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("bsq.csv")).unwrap();
        assert_eq!(text, "method,x264\nNo SR,1\nbicubic,\n");
        assert!(table.to_markdown().contains("| No SR | **1.000** |"));
    }
}
