//! Ranked comparison tables with top-3 markers.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

/// Best, second and third value of a column (bold, underline, italics).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Marker {
    First,
    Second,
    Third,
}

impl Marker {
    pub fn wrap_markdown(self, text: &str) -> String {
        match self {
            Marker::First => format!("**{text}**"),
            Marker::Second => format!("<u>{text}</u>"),
            Marker::Third => format!("*{text}*"),
        }
    }
}

/// Mark the three best distinct values; equal values share a marker.
pub fn top3_markers(values: &[Option<f64>], direction: Direction) -> Vec<Option<Marker>> {
    let mut distinct: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    distinct.sort_by(|a, b| match direction {
        Direction::HigherIsBetter => b.total_cmp(a),
        Direction::LowerIsBetter => a.total_cmp(b),
    });
    distinct.dedup();
    let marks = [Marker::First, Marker::Second, Marker::Third];
    values
        .iter()
        .map(|v| {
            let v = (*v)?;
            distinct.iter().take(3).position(|d| *d == v).map(|i| marks[i])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricColumn {
    pub name: String,
    pub direction: Direction,
}

impl MetricColumn {
    pub fn new(name: impl Into<String>, direction: Direction) -> Self {
        MetricColumn {
            name: name.into(),
            direction,
        }
    }

    /// Direction by metric name: LPIPS is a distance, everything else a score.
    pub fn by_name(name: &str) -> Self {
        let direction = if name.eq_ignore_ascii_case("lpips") {
            Direction::LowerIsBetter
        } else {
            Direction::HigherIsBetter
        };
        MetricColumn::new(name, direction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub label: String,
    pub subjective: f64,
    /// One value per metric column; None when not computed.
    pub metrics: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub rank: usize,
    pub label: String,
    pub subjective: f64,
    pub metrics: Vec<Option<f64>>,
    pub subjective_marker: Option<Marker>,
    pub metric_markers: Vec<Option<Marker>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub columns: Vec<MetricColumn>,
    pub rows: Vec<RankedRow>,
}

/// Sort by subjective score descending (ties by label) and mark the top 3 of
/// every column.
pub fn rank_table(entries: &[RankEntry], columns: &[MetricColumn]) -> RankTable {
    let mut sorted: Vec<&RankEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| {
        b.subjective
            .partial_cmp(&a.subjective)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.label.cmp(&b.label))
    });
    let subj: Vec<Option<f64>> = sorted.iter().map(|e| Some(e.subjective)).collect();
    let subj_marks = top3_markers(&subj, Direction::HigherIsBetter);
    let col_marks: Vec<Vec<Option<Marker>>> = columns
        .iter()
        .enumerate()
        .map(|(c, col)| {
            let vals: Vec<Option<f64>> = sorted.iter().map(|e| e.metrics.get(c).copied().flatten()).collect();
            top3_markers(&vals, col.direction)
        })
        .collect();
    let rows = sorted
        .iter()
        .enumerate()
        .map(|(i, e)| RankedRow {
            rank: i + 1,
            label: e.label.clone(),
            subjective: e.subjective,
            metrics: (0..columns.len()).map(|c| e.metrics.get(c).copied().flatten()).collect(),
            subjective_marker: subj_marks[i],
            metric_markers: col_marks.iter().map(|m| m[i]).collect(),
        })
        .collect();
    RankTable {
        columns: columns.to_vec(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(label: &str, s: f64, m: f64) -> RankEntry {
        RankEntry {
            label: label.into(),
            subjective: s,
            metrics: vec![Some(m)],
        }
    }

    #[test]
    fn single_entry_gets_everything() {
        let t = rank_table(&[entry("a", 1.0, 0.3)], &[MetricColumn::by_name("LPIPS")]);
        assert_eq!(t.rows[0].rank, 1);
        assert_eq!(t.rows[0].subjective_marker, Some(Marker::First));
        assert_eq!(t.rows[0].metric_markers, vec![Some(Marker::First)]);
    }

    #[test]
    fn ties_break_by_label() {
        let t = rank_table(&[entry("b", 2.0, 0.0), entry("a", 2.0, 1.0), entry("c", 3.0, 0.5)], &[MetricColumn::by_name("erqa")]);
        let labels: Vec<&str> = t.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["c", "a", "b"]);
        assert_eq!(t.rows[1].subjective_marker, Some(Marker::Second));
        assert_eq!(t.rows[2].subjective_marker, Some(Marker::Second));
    }

    #[test]
    fn direction_and_missing_values() {
        let v = [Some(0.3), None, Some(0.1), Some(0.2), Some(0.4)];
        let m = top3_markers(&v, Direction::LowerIsBetter);
        assert_eq!(m, vec![Some(Marker::Third), None, Some(Marker::First), Some(Marker::Second), None]);
        let m = top3_markers(&v, Direction::HigherIsBetter);
        assert_eq!(m, vec![Some(Marker::Second), None, None, Some(Marker::Third), Some(Marker::First)]);
    }
}
