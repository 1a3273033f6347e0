//! K-means curation of representative clips.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoFeatures {
    pub id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansSelection {
    /// Chosen video per cluster, in cluster order.
    pub selected: Vec<String>,
    /// Cluster of every input row.
    pub assignments: Vec<usize>,
    /// Centroids in standardized units.
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

/// Column-wise z-scores; constant columns become 0.
pub fn standardize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows.first().map_or(0, |r| r.len());
    let mut out = rows.to_vec();
    for j in 0..d {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for r in &mut out {
            r[j] = if sd > 0.0 { (r[j] - mean) / sd } else { 0.0 };
        }
    }
    out
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(c, m)| (c, dist2(p, m)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            inertia += d;
            best
        })
        .collect();
    (labels, inertia)
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centroids.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = d.iter().rposition(|&x| x > 0.0).unwrap_or(0);
        for (i, &di) in d.iter().enumerate() {
            if di > 0.0 && target < di {
                pick = i;
                break;
            }
            target -= di;
        }
        centroids.push(points[pick].clone());
    }
    centroids
}

/// Cluster standardized rows into `k` groups and pick, per cluster, the video
/// nearest its centroid (ties by id).
pub fn kmeans_select(videos: &[VideoFeatures], k: usize, seed: u64) -> Result<KMeansSelection> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let d = videos.first().map_or(0, |v| v.values.len());
    if let Some(v) = videos.iter().find(|v| v.values.len() != d || v.values.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidParameter(format!("video `{}` has a malformed feature row", v.id)));
    }
    let points = standardize(&videos.iter().map(|v| v.values.clone()).collect::<Vec<_>>());
    let mut distinct = points.clone();
    distinct.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} distinct feature rows for {k} clusters",
            distinct.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(&points, k, &mut rng);
    let (mut labels, inertia) = assign(&points, &centroids);
    let mut trace = vec![inertia];
    let mut iterations = 0;
    while iterations < MAX_LLOYD_ITERATIONS {
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, l)| **l == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for j in 0..d {
                centroid[j] = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
            }
        }
        let (next, inertia) = assign(&points, &centroids);
        iterations += 1;
        trace.push(inertia);
        if next == labels {
            break;
        }
        labels = next;
    }

    let selected = (0..k)
        .map(|c| {
            points
                .iter()
                .zip(videos)
                .zip(&labels)
                .filter(|(_, l)| **l == c)
                .map(|((p, v), _)| (dist2(p, &centroids[c]), &v.id))
                .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)))
                .map(|(_, id)| id.clone())
                .ok_or_else(|| Error::InsufficientData(format!("cluster {c} ended empty")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KMeansSelection {
        selected,
        assignments: labels,
        centroids,
        inertia_trace: trace,
        iterations,
    })
}
