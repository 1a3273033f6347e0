use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::svr::{train_svr, SvrParams};
use super::{Feature, FeatureVector, TrainingSample};
use crate::error::{Error, Result};

/// Per-feature min and max seen in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub features: Vec<Feature>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationStats {
    /// Features whose training range is a single value; they normalize to 0.
    pub fn degenerate(&self) -> Vec<Feature> {
        self.features
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .filter(|(_, (lo, hi))| lo == hi)
            .map(|(f, _)| *f)
            .collect()
    }

    /// Map one raw value of feature slot `i` into [0, 1].
    pub fn normalize(&self, i: usize, x: f64) -> f64 {
        let (lo, hi) = (self.min[i], self.max[i]);
        if hi == lo {
            0.0
        } else {
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
        }
    }

    /// Normalized values in `self.features` order.
    pub fn apply(&self, v: &FeatureVector) -> Vec<f64> {
        self.features
            .iter()
            .enumerate()
            .map(|(i, f)| self.normalize(i, v.get(*f)))
            .collect()
    }

    /// Stats for a subset, in the order given.
    pub fn restrict(&self, subset: &[Feature]) -> Result<NormalizationStats> {
        let mut out = NormalizationStats {
            features: Vec::with_capacity(subset.len()),
            min: Vec::with_capacity(subset.len()),
            max: Vec::with_capacity(subset.len()),
        };
        for f in subset {
            let i = self
                .features
                .iter()
                .position(|g| g == f)
                .ok_or_else(|| Error::InvalidParameter(format!("no normalization stats for `{f}`")))?;
            out.features.push(*f);
            out.min.push(self.min[i]);
            out.max.push(self.max[i]);
        }
        Ok(out)
    }
}

/// Min-max statistics of all nine features over `samples`.
pub fn fit_normalization(samples: &[TrainingSample]) -> Result<NormalizationStats> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("normalization needs at least one sample".into()));
    }
    let mut min = [f64::INFINITY; 9];
    let mut max = [f64::NEG_INFINITY; 9];
    for s in samples {
        for (i, v) in s.features.to_array().into_iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    Ok(NormalizationStats {
        features: Feature::ALL.to_vec(),
        min: min.to_vec(),
        max: max.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub active_features: Vec<Feature>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub norm: NormalizationStats,
    pub hyperparams: SvrParams,
    #[serde(default)]
    pub provider_hashes: BTreeMap<String, String>,
    /// Seconds since the Unix epoch.
    #[serde(default)]
    pub created_at: u64,
}

impl FusionModel {
    pub fn validate(&self) -> Result<()> {
        let n = self.active_features.len();
        if self.weights.len() != n || self.norm.min.len() != n || self.norm.max.len() != n {
            return Err(Error::InvalidParameter(format!(
                "model has {n} features, {} weights, {} normalization bounds",
                self.weights.len(),
                self.norm.min.len()
            )));
        }
        if self.norm.features != self.active_features {
            return Err(Error::InvalidParameter("normalization features differ from active features".into()));
        }
        if self.norm.min.iter().zip(&self.norm.max).any(|(lo, hi)| !(hi >= lo)) {
            return Err(Error::InvalidParameter("normalization max below min".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FusionModel> {
        let m: FusionModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        m.validate()?;
        Ok(m)
    }
}

/// w . normalize(x) + b over the active features. Not clamped.
pub fn predict(model: &FusionModel, features: &FeatureVector) -> f64 {
    model
        .norm
        .apply(features)
        .iter()
        .zip(&model.weights)
        .map(|(x, w)| x * w)
        .sum::<f64>()
        + model.bias
}

/// Fit normalization on `samples`, then the SVR on the `active` subset.
pub fn train_model(samples: &[TrainingSample], active: &[Feature], params: &SvrParams) -> Result<FusionModel> {
    if active.is_empty() {
        return Err(Error::InvalidParameter("no active features".into()));
    }
    let bad: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.features.is_finite() || !s.subjective_score.is_finite())
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::NonFiniteSamples(bad));
    }
    let norm = fit_normalization(samples)?.restrict(active)?;
    let x: Vec<Vec<f64>> = samples.iter().map(|s| norm.apply(&s.features)).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.subjective_score).collect();
    let svr = train_svr(&x, &y, params)?;
    let created_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(FusionModel {
        active_features: active.to_vec(),
        weights: svr.weights,
        bias: svr.bias,
        norm,
        hyperparams: *params,
        provider_hashes: BTreeMap::new(),
        created_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(erqa: f64, si: f64) -> TrainingSample {
        TrainingSample {
            features: FeatureVector::from_base(erqa, 0.2, 0.5, si, 1.0, 3.0, 100.0),
            subjective_score: 0.5,
            group_id: "g".into(),
        }
    }

    #[test]
    fn min_max_and_clamp() {
        let s = vec![sample(2.0, 1.0), sample(4.0, 1.0), sample(6.0, 1.0)];
        let n = fit_normalization(&s).unwrap();
        let i = Feature::Erqa.index();
        assert_eq!((n.min[i], n.max[i]), (2.0, 6.0));
        assert_eq!(n.normalize(i, 4.0), 0.5);
        assert_eq!(n.normalize(i, 9.0), 1.0);
        assert_eq!(n.normalize(i, -1.0), 0.0);
        assert!(n.degenerate().contains(&Feature::Si));
        assert_eq!(n.normalize(Feature::Si.index(), 123.0), 0.0);
        assert!(fit_normalization(&[]).is_err());
    }

    fn hand_model(weights: Vec<f64>, bias: f64) -> FusionModel {
        let active = Feature::DEFAULT_ACTIVE.to_vec();
        let k = active.len();
        FusionModel {
            norm: NormalizationStats {
                features: active.clone(),
                min: vec![0.0; k],
                max: vec![1.0; k],
            },
            active_features: active,
            weights,
            bias,
            hyperparams: SvrParams::default(),
            provider_hashes: BTreeMap::new(),
            created_at: 0,
        }
    }

    #[test]
    fn hand_set_models() {
        let f = FeatureVector::from_base(0.6, 0.9, 0.4, 0.3, 0.2, 0.1, 5.0);
        assert_eq!(predict(&hand_model(vec![0.0; 7], 0.7), &f), 0.7);
        let mut w = vec![0.0; 7];
        w[0] = 1.0;
        assert!((predict(&hand_model(w, 0.0), &f) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn save_load_predict() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let s: Vec<TrainingSample> = (0..10)
            .map(|i| {
                let x = i as f64 / 10.0;
                TrainingSample {
                    features: FeatureVector::from_base(x, 1.0 - x, x * x, 3.0 * x, 1.0, 2.0 + x, 500.0),
                    subjective_score: 0.2 + 0.6 * x,
                    group_id: format!("g{i}"),
                }
            })
            .collect();
        let mut m = train_model(&s, &Feature::DEFAULT_ACTIVE, &SvrParams::default()).unwrap();
        m.provider_hashes.insert("lpips".into(), "abc".into());
        m.save(&path).unwrap();
        let back = FusionModel::load(&path).unwrap();
        assert_eq!(back, m);
        let probe = FeatureVector::from_base(0.33, 0.5, 0.2, 1.0, 1.0, 2.1, 10.0);
        assert!((predict(&back, &probe) - predict(&m, &probe)).abs() < 1e-12);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"erqa_x_mdtvsfa\""));
    }

    #[test]
    fn load_rejects_inconsistent_model() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut m = hand_model(vec![0.0; 7], 0.0);
        m.weights.pop();
        std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(FusionModel::load(&path).is_err());
    }
}
