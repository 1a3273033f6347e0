//! Cross-validation and single-pass feature-pair ablation.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{predict, train_model};
use super::svr::SvrParams;
use super::{Feature, TrainingSample};
use crate::analysis::{pearson, spearman};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum FoldMode {
    /// Sorted group ids dealt round-robin into folds.
    #[default]
    Grouped,
    /// Samples shuffled with a fixed seed, then dealt round-robin.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub srcc: f64,
    pub plcc: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub test_groups: Vec<String>,
}

/// Fold index of every sample.
pub fn fold_assignment(samples: &[TrainingSample], folds: usize, mode: FoldMode) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    match mode {
        FoldMode::Grouped => {
            let mut groups: Vec<&str> = samples.iter().map(|s| s.group_id.as_str()).collect();
            groups.sort_unstable();
            groups.dedup();
            if groups.len() < folds {
                return Err(Error::InsufficientData(format!(
                    "{} groups for {folds} folds",
                    groups.len()
                )));
            }
            let fold_of: BTreeMap<&str, usize> = groups.iter().enumerate().map(|(i, g)| (*g, i % folds)).collect();
            Ok(samples.iter().map(|s| fold_of[s.group_id.as_str()]).collect())
        }
        FoldMode::Random { seed } => {
            if samples.len() < folds {
                return Err(Error::InsufficientData(format!("{} samples for {folds} folds", samples.len())));
            }
            let mut order = canonical_order(samples, (0..samples.len()).collect());
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut out = vec![0; samples.len()];
            for (k, i) in order.into_iter().enumerate() {
                out[i] = k % folds;
            }
            Ok(out)
        }
    }
}

fn sample_cmp(a: &TrainingSample, b: &TrainingSample) -> Ordering {
    a.group_id
        .cmp(&b.group_id)
        .then_with(|| {
            a.features
                .to_array()
                .iter()
                .zip(b.features.to_array().iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.subjective_score.total_cmp(&b.subjective_score))
}

/// Indices sorted by content so results do not depend on input order.
fn canonical_order(samples: &[TrainingSample], mut idx: Vec<usize>) -> Vec<usize> {
    idx.sort_by(|&a, &b| sample_cmp(&samples[a], &samples[b]));
    idx
}

fn correlation_or_zero(r: Result<f64>, what: &str, fold: usize) -> f64 {
    r.unwrap_or_else(|e| {
        log::warn!("fold {fold}: {what} undefined ({e}); reporting 0");
        0.0
    })
}

/// Per-fold SRCC and PLCC of a model trained on the other folds.
pub fn cross_validate(
    samples: &[TrainingSample],
    folds: usize,
    active: &[Feature],
    params: &SvrParams,
    mode: FoldMode,
) -> Result<Vec<FoldResult>> {
    let assignment = fold_assignment(samples, folds, mode)?;
    (0..folds)
        .into_par_iter()
        .map(|k| {
            let train_idx = canonical_order(samples, (0..samples.len()).filter(|&i| assignment[i] != k).collect());
            let test_idx = canonical_order(samples, (0..samples.len()).filter(|&i| assignment[i] == k).collect());
            let train: Vec<TrainingSample> = train_idx.iter().map(|&i| samples[i].clone()).collect();
            let model = train_model(&train, active, params)?;
            let pred: Vec<f64> = test_idx.iter().map(|&i| predict(&model, &samples[i].features)).collect();
            let truth: Vec<f64> = test_idx.iter().map(|&i| samples[i].subjective_score).collect();
            let mut test_groups: Vec<String> = test_idx.iter().map(|&i| samples[i].group_id.clone()).collect();
            test_groups.dedup();
            Ok(FoldResult {
                fold: k,
                srcc: correlation_or_zero(spearman(&pred, &truth), "SRCC", k),
                plcc: correlation_or_zero(pearson(&pred, &truth), "PLCC", k),
                train_size: train_idx.len(),
                test_size: test_idx.len(),
                test_groups,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    pub removed: (Feature, Feature),
    /// Worst fold SRCC without the pair.
    pub objective: f64,
    pub folds: Vec<FoldResult>,
}

impl AblationEntry {
    pub fn pair_name(&self) -> String {
        pair_name(self.removed)
    }
}

fn pair_name((a, b): (Feature, Feature)) -> String {
    let (x, y) = if a.name() <= b.name() { (a, b) } else { (b, a) };
    format!("{}+{}", x.name(), y.name())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    /// Sorted by objective descending, then pair name.
    pub entries: Vec<AblationEntry>,
    pub best_removed: (Feature, Feature),
    pub best_subset: Vec<Feature>,
}

/// Cross-validate with every unordered pair of `candidates` removed.
pub fn ablate_feature_pairs(
    samples: &[TrainingSample],
    candidates: &[Feature],
    folds: usize,
    params: &SvrParams,
    mode: FoldMode,
) -> Result<AblationReport> {
    if candidates.len() < 3 {
        return Err(Error::InvalidParameter("ablation needs at least 3 candidate features".into()));
    }
    let pairs: Vec<(Feature, Feature)> = (0..candidates.len())
        .flat_map(|i| (i + 1..candidates.len()).map(move |j| (i, j)))
        .map(|(i, j)| (candidates[i], candidates[j]))
        .collect();
    let mut entries = pairs
        .par_iter()
        .map(|&(f, g)| {
            let kept: Vec<Feature> = candidates.iter().copied().filter(|c| *c != f && *c != g).collect();
            let folds = cross_validate(samples, folds, &kept, params, mode)?;
            let objective = folds.iter().map(|r| r.srcc).fold(f64::INFINITY, f64::min);
            Ok(AblationEntry {
                removed: (f, g),
                objective,
                folds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| {
        b.objective
            .total_cmp(&a.objective)
            .then_with(|| a.pair_name().cmp(&b.pair_name()))
    });
    let best_removed = entries[0].removed;
    let best_subset = candidates
        .iter()
        .copied()
        .filter(|c| *c != best_removed.0 && *c != best_removed.1)
        .collect();
    Ok(AblationReport {
        entries,
        best_removed,
        best_subset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::FeatureVector;
    use rand::Rng;

    fn random_samples(groups: usize, per_group: usize, seed: u64, informative: bool) -> Vec<TrainingSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for g in 0..groups {
            for _ in 0..per_group {
                let v: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
                let f = FeatureVector::from_base(v[0], v[1], v[2], v[3], v[4], v[5], 100.0 + 900.0 * v[6]);
                let y = if informative {
                    0.4 * f.erqa + 0.3 * (1.0 - f.lpips) + 0.3 * f.si + rng.random_range(-0.02..0.02)
                } else {
                    rng.random::<f64>()
                };
                out.push(TrainingSample {
                    features: f,
                    subjective_score: y,
                    group_id: format!("src{g:02}"),
                });
            }
        }
        out
    }

    #[test]
    fn grouped_folds_partition_groups() {
        let s = random_samples(7, 3, 1, true);
        let a = fold_assignment(&s, 3, FoldMode::Grouped).unwrap();
        for (i, si) in s.iter().enumerate() {
            for (j, sj) in s.iter().enumerate() {
                if si.group_id == sj.group_id {
                    assert_eq!(a[i], a[j]);
                }
            }
        }
        // sorted ids dealt round-robin
        assert_eq!(a[0], 0);
        assert_eq!(a[3], 1);
        assert_eq!(a[6 * 3], 0);
        assert!(fold_assignment(&random_samples(2, 3, 1, true), 3, FoldMode::Grouped).is_err());
    }

    #[test]
    fn duplicating_a_group_keeps_other_folds() {
        let s = random_samples(6, 2, 2, true);
        let base = fold_assignment(&s, 3, FoldMode::Grouped).unwrap();
        let mut dup = s.clone();
        dup.extend(s.iter().filter(|x| x.group_id == "src03").cloned());
        let more = fold_assignment(&dup, 3, FoldMode::Grouped).unwrap();
        assert_eq!(&more[..s.len()], &base[..]);
    }

    #[test]
    fn linear_signal_is_recovered() {
        let s = random_samples(30, 8, 3, true);
        let folds = cross_validate(&s, 3, &Feature::DEFAULT_ACTIVE, &SvrParams::default(), FoldMode::Grouped).unwrap();
        assert_eq!(folds.len(), 3);
        for f in &folds {
            assert!(f.srcc >= 0.95, "{f:?}");
        }
    }

    #[test]
    fn pure_noise_has_weak_correlation() {
        let s = random_samples(30, 4, 4, false);
        let folds = cross_validate(&s, 3, &Feature::DEFAULT_ACTIVE, &SvrParams::default(), FoldMode::Grouped).unwrap();
        let mean_abs = folds.iter().map(|f| f.srcc.abs()).sum::<f64>() / 3.0;
        assert!(mean_abs <= 0.35, "{folds:?}");
    }

    #[test]
    fn order_invariant() {
        let s = random_samples(9, 3, 5, true);
        let mut shuffled = s.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
        for mode in [FoldMode::Grouped, FoldMode::Random { seed: 7 }] {
            let a = cross_validate(&s, 3, &Feature::DEFAULT_ACTIVE, &SvrParams::default(), mode).unwrap();
            let b = cross_validate(&shuffled, 3, &Feature::DEFAULT_ACTIVE, &SvrParams::default(), mode).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ablation_enumerates_all_pairs() {
        let s = random_samples(6, 3, 6, true);
        let r = ablate_feature_pairs(&s, &Feature::ALL, 3, &SvrParams::default(), FoldMode::Grouped).unwrap();
        assert_eq!(r.entries.len(), 36);
        assert_eq!(r.best_subset.len(), 7);
        for w in r.entries.windows(2) {
            assert!(w[0].objective >= w[1].objective);
        }
    }
}
