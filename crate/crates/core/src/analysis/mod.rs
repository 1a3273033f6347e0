//! Correlations, RD curves and BSQ-rate, rankings, clip curation and reports.

mod bsq;
mod correlation;
mod kmeans;
pub mod reference_results;
mod rank;
mod report;

pub use bsq::{average_bsq, bsq_rate, Averaging, BsqResult, RDCurve, RDPoint, SIMPSON_INTERVALS};
pub use correlation::{fractional_ranks, pearson, spearman};
pub use kmeans::{kmeans_select, standardize, KMeansSelection, VideoFeatures, MAX_LLOYD_ITERATIONS};
pub use rank::{rank_table, top3_markers, Direction, Marker, MetricColumn, RankEntry, RankTable, RankedRow};
pub use report::{
    correlation_report, correlations_markdown, write_correlations_csv, write_json, BsqTable, ClipCorrelation,
    CorrelationReport, Observation,
};
