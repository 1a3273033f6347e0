//! Published benchmark numbers, kept as fixtures for the table code.
//!
//! Marker codes: 0 none, 1 best, 2 second, 3 third.

use super::rank::{Direction, Marker, MetricColumn, RankEntry};

pub const CODECS: [&str; 5] = ["x264", "x265", "aomenc", "vvenc", "uavs3e"];

/// Mean BSQ-rate per SR method (rows) and codec (columns); lower is better.
pub const BSQ_BY_CODEC: [(&str, [f64; 5], [u8; 5]); 9] = [
    ("No SR", [1.000, 1.000, 1.000, 1.000, 1.000], [0, 0, 1, 2, 3]),
    ("RealSR", [0.196, 0.502, 1.513, 4.470, 0.639], [1, 2, 3, 0, 1]),
    ("ahq-11", [0.271, 0.724, 2.806, 1.665, 1.750], [2, 0, 0, 3, 0]),
    ("SwinIR", [0.304, 0.346, 1.505, 2.502, 0.640], [3, 1, 2, 0, 2]),
    ("Real-ESRGAN", [0.335, 0.640, 2.411, 4.368, 2.430], [0, 3, 0, 0, 0]),
    ("COMISR", [0.367, 0.741, 2.799, 0.701, 1.603], [0, 0, 0, 1, 0]),
    ("VRT", [1.245, 3.175, 4.157, 4.185, 3.663], [0; 5]),
    ("BasicVSR++", [1.971, 3.390, 4.199, 4.185, 4.250], [0; 5]),
    ("RBPN", [1.979, 3.434, 4.226, 4.246, 4.470], [0; 5]),
];

pub const PAIR_METRICS: [&str; 5] = ["ERQA", "LPIPS", "VMAF", "PSNR", "MS-SSIM"];

/// Top SR+codec pairs on one clip, in published rank order:
/// (rank, label, subjective, metrics in `PAIR_METRICS` order, markers for subjective then metrics).
pub const PAIR_RANKING: [(usize, &str, f64, [f64; 5], [u8; 6]); 10] = [
    (1, "SwinIR + x264", 5.855, [0.601, 0.237, 73.921, 24.961, 0.932], [1, 1, 0, 0, 0, 0]),
    (2, "RealSR + x264", 5.838, [0.565, 0.268, 69.906, 25.449, 0.933], [2, 0, 0, 0, 3, 0]),
    (3, "Real-ESRGAN + x264", 5.142, [0.560, 0.238, 71.277, 25.083, 0.934], [3, 0, 0, 0, 0, 0]),
    (4, "ahq-11 + x264", 5.049, [0.579, 0.217, 74.954, 26.209, 0.939], [0, 0, 2, 0, 1, 2]),
    (5, "COMISR + x264", 4.966, [0.550, 0.256, 42.892, 24.417, 0.909], [0; 6]),
    (6, "SwinIR + x265", 4.801, [0.585, 0.231, 75.784, 25.034, 0.936], [0, 0, 0, 3, 0, 0]),
    (7, "RealSR + x265", 4.738, [0.584, 0.260, 71.991, 25.519, 0.936], [0, 0, 0, 0, 2, 0]),
    (8, "Real-ESRGAN + x265", 4.312, [0.576, 0.232, 73.013, 25.113, 0.937], [0, 0, 0, 0, 0, 3]),
    (9, "SwinIR + uavs3e", 4.206, [0.597, 0.228, 80.147, 24.954, 0.933], [0, 3, 3, 2, 0, 0]),
    (10, "SwinIR + aomenc", 3.843, [0.598, 0.198, 89.183, 25.245, 0.952], [0, 2, 1, 1, 0, 1]),
];

/// Mean PLCC and SRCC of each metric against subjective scores.
pub const METRIC_CORRELATIONS: [(&str, f64, f64); 8] = [
    ("MS-SSIM", 0.146, 0.151),
    ("PSNR", 0.187, 0.285),
    ("VMAF", 0.344, 0.448),
    ("LPIPS", 0.414, 0.431),
    ("ERQA", 0.582, 0.624),
    ("MDTVSFA", 0.634, 0.644),
    ("ERQAxMDTVSFA", 0.770, 0.801),
    ("Proposed", 0.821, 0.838),
];

pub const LIVE_SUBSETS: [&str; 4] = ["Wireless", "H.264", "MPEG-2", "All Data"];

/// SROCC against DMOS per distortion subset of a public VQA database.
pub const LIVE_SROCC: [(&str, [f64; 4], [u8; 4]); 9] = [
    ("PSNR", [0.4334, 0.4296, 0.3588, 0.3684], [0; 4]),
    ("SSIM", [0.5233, 0.6514, 0.5545, 0.5257], [0; 4]),
    ("Speed SSIM", [0.5630, 0.7086, 0.6185, 0.5849], [0; 4]),
    ("VSNR", [0.7019, 0.6460, 0.5915, 0.6755], [0; 4]),
    ("V-VIF", [0.5507, 0.6807, 0.6116, 0.5710], [0; 4]),
    ("Spatial MOVIE", [0.7928, 0.7066, 0.6911, 0.7270], [0; 4]),
    ("Temporal MOVIE", [0.8114, 0.7797, 0.8170, 0.8055], [1, 2, 1, 1]),
    ("MOVIE", [0.8109, 0.7664, 0.7733, 0.7890], [2, 3, 2, 3]),
    ("Proposed", [0.7934, 0.8465, 0.7554, 0.7946], [3, 1, 3, 2]),
];

pub fn marker_from_code(code: u8) -> Option<Marker> {
    match code {
        1 => Some(Marker::First),
        2 => Some(Marker::Second),
        3 => Some(Marker::Third),
        _ => None,
    }
}

/// The pair-ranking rows as `rank_table` input, plus matching columns.
pub fn pair_ranking_entries() -> (Vec<RankEntry>, Vec<MetricColumn>) {
    let entries = PAIR_RANKING
        .iter()
        .map(|(_, label, subj, m, _)| RankEntry {
            label: (*label).to_owned(),
            subjective: *subj,
            metrics: m.iter().map(|v| Some(*v)).collect(),
        })
        .collect();
    let columns = PAIR_METRICS.iter().map(|n| MetricColumn::by_name(n)).collect();
    (entries, columns)
}

pub const BSQ_DIRECTION: Direction = Direction::LowerIsBetter;
