//! Fused quality model: per-video features, min-max normalization and a
//! linear SVR trained against subjective scores.

mod cv;
mod model;
mod svr;

pub use cv::{ablate_feature_pairs, cross_validate, AblationEntry, AblationReport, FoldMode, FoldResult};
pub use model::{fit_normalization, predict, train_model, FusionModel, NormalizationStats};
pub use svr::{optimal_bias, svr_objective, train_svr, LinearSvr, SvrParams, DEFAULT_C, DEFAULT_EPSILON};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::erqa::{erqa_clip, ErqaParams};
use crate::error::{Error, Result};
use crate::media::VideoClip;
use crate::metrics::{colorfulness, si_ti};
use crate::neural::{lpips_distance, mdtvsfa_score, ProviderHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Erqa,
    Lpips,
    Mdtvsfa,
    ErqaXLpips,
    ErqaXMdtvsfa,
    Si,
    Ti,
    Colorfulness,
    BitrateKbps,
}

impl Feature {
    /// Canonical order.
    pub const ALL: [Feature; 9] = [
        Feature::Erqa,
        Feature::Lpips,
        Feature::Mdtvsfa,
        Feature::ErqaXLpips,
        Feature::ErqaXMdtvsfa,
        Feature::Si,
        Feature::Ti,
        Feature::Colorfulness,
        Feature::BitrateKbps,
    ];

    /// The shipped model's inputs.
    pub const DEFAULT_ACTIVE: [Feature; 7] = [
        Feature::Erqa,
        Feature::Lpips,
        Feature::ErqaXLpips,
        Feature::ErqaXMdtvsfa,
        Feature::Si,
        Feature::Ti,
        Feature::Colorfulness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Erqa => "erqa",
            Feature::Lpips => "lpips",
            Feature::Mdtvsfa => "mdtvsfa",
            Feature::ErqaXLpips => "erqa_x_lpips",
            Feature::ErqaXMdtvsfa => "erqa_x_mdtvsfa",
            Feature::Si => "si",
            Feature::Ti => "ti",
            Feature::Colorfulness => "colorfulness",
            Feature::BitrateKbps => "bitrate_kbps",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown feature `{s}`")))
    }
}

/// The nine candidate per-video features.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub erqa: f64,
    pub lpips: f64,
    pub mdtvsfa: f64,
    pub erqa_x_lpips: f64,
    pub erqa_x_mdtvsfa: f64,
    pub si: f64,
    pub ti: f64,
    pub colorfulness: f64,
    pub bitrate_kbps: f64,
}

impl FeatureVector {
    /// Build from the base metrics, computing the two products.
    pub fn from_base(erqa: f64, lpips: f64, mdtvsfa: f64, si: f64, ti: f64, colorfulness: f64, bitrate_kbps: f64) -> Self {
        FeatureVector {
            erqa,
            lpips,
            mdtvsfa,
            erqa_x_lpips: erqa * lpips,
            erqa_x_mdtvsfa: erqa * mdtvsfa,
            si,
            ti,
            colorfulness,
            bitrate_kbps,
        }
    }

    pub fn get(&self, f: Feature) -> f64 {
        self.to_array()[f.index()]
    }

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.erqa,
            self.lpips,
            self.mdtvsfa,
            self.erqa_x_lpips,
            self.erqa_x_mdtvsfa,
            self.si,
            self.ti,
            self.colorfulness,
            self.bitrate_kbps,
        ]
    }

    pub fn from_array(v: [f64; 9]) -> Self {
        FeatureVector {
            erqa: v[0],
            lpips: v[1],
            mdtvsfa: v[2],
            erqa_x_lpips: v[3],
            erqa_x_mdtvsfa: v[4],
            si: v[5],
            ti: v[6],
            colorfulness: v[7],
            bitrate_kbps: v[8],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Products agree with their factors to 1e-12.
    pub fn products_consistent(&self) -> bool {
        (self.erqa_x_lpips - self.erqa * self.lpips).abs() <= 1e-12
            && (self.erqa_x_mdtvsfa - self.erqa * self.mdtvsfa).abs() <= 1e-12
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: FeatureVector,
    /// Rescaled subjective score in [0, 1].
    pub subjective_score: f64,
    /// Source-video identifier; cross-validation keeps groups together.
    pub group_id: String,
}

/// Providers and ERQA settings used to assemble features.
#[derive(Debug, Clone)]
pub struct FeatureProviders {
    pub lpips: ProviderHandle,
    pub mdtvsfa: ProviderHandle,
    pub erqa: ErqaParams,
}

impl FeatureProviders {
    pub fn stubs() -> Self {
        FeatureProviders {
            lpips: ProviderHandle::stub(),
            mdtvsfa: ProviderHandle::stub(),
            erqa: ErqaParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledFeatures {
    pub features: FeatureVector,
    /// True when the distorted clip carried no bitrate and 0 was used.
    pub bitrate_missing: bool,
}

/// Compute all nine features for one (reference, distorted) pair.
pub fn assemble_features(reference: &VideoClip, distorted: &VideoClip, providers: &FeatureProviders) -> Result<AssembledFeatures> {
    let erqa = erqa_clip(reference, distorted, &providers.erqa).map_err(|e| Error::feature("erqa", e))?;
    let lpips = lpips_distance(&providers.lpips, reference, distorted).map_err(|e| Error::feature("lpips", e))?;
    let mdtvsfa = mdtvsfa_score(&providers.mdtvsfa, distorted).map_err(|e| Error::feature("mdtvsfa", e))?;
    let st = si_ti(distorted);
    let color = colorfulness(distorted);
    let bitrate_missing = distorted.encoded_bitrate_kbps.is_none();
    if bitrate_missing {
        log::warn!("clip `{}` has no bitrate; using 0", distorted.source_id);
    }
    let features = FeatureVector::from_base(
        erqa.value,
        lpips.value,
        mdtvsfa.value,
        st.si,
        st.ti,
        color.value,
        distorted.encoded_bitrate_kbps.unwrap_or(0.0),
    );
    if !features.is_finite() {
        return Err(Error::NonFiniteSamples(vec![0]));
    }
    Ok(AssembledFeatures {
        features,
        bitrate_missing,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureRow {
    erqa: f64,
    lpips: f64,
    mdtvsfa: f64,
    erqa_x_lpips: f64,
    erqa_x_mdtvsfa: f64,
    si: f64,
    ti: f64,
    colorfulness: f64,
    bitrate_kbps: f64,
    subjective_score: f64,
    group_id: String,
}

/// Write the feature table: nine feature columns, `subjective_score`, `group_id`.
pub fn write_feature_table(path: &Path, samples: &[TrainingSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in samples {
        let f = &s.features;
        w.serialize(FeatureRow {
            erqa: f.erqa,
            lpips: f.lpips,
            mdtvsfa: f.mdtvsfa,
            erqa_x_lpips: f.erqa_x_lpips,
            erqa_x_mdtvsfa: f.erqa_x_mdtvsfa,
            si: f.si,
            ti: f.ti,
            colorfulness: f.colorfulness,
            bitrate_kbps: f.bitrate_kbps,
            subjective_score: s.subjective_score,
            group_id: s.group_id.clone(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_table(path: &Path) -> Result<Vec<TrainingSample>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: FeatureRow = row?;
        out.push(TrainingSample {
            features: FeatureVector {
                erqa: row.erqa,
                lpips: row.lpips,
                mdtvsfa: row.mdtvsfa,
                erqa_x_lpips: row.erqa_x_lpips,
                erqa_x_mdtvsfa: row.erqa_x_mdtvsfa,
                si: row.si,
                ti: row.ti,
                colorfulness: row.colorfulness,
                bitrate_kbps: row.bitrate_kbps,
            },
            subjective_score: row.subjective_score,
            group_id: row.group_id,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erqa::erqa_score;
    use crate::media::{Frame, FrameRate};
    use crate::metrics::{frame_colorfulness, sobel_magnitude_interior};
    use crate::neural::{stub_lpips_frame, stub_mdtvsfa_frame};
    use proptest::prelude::*;

    fn textured_clip(seed: u32, n: usize) -> VideoClip {
        let (w, h) = (24, 16);
        let frames = (0..n)
            .map(|k| {
                let rgb: Vec<u8> = (0..w * h * 3)
                    .map(|i| ((i as u32 * 31 + seed * 17 + k as u32 * 7) % 253) as u8)
                    .collect();
                Frame::from_rgb_interleaved(w, h, &rgb).unwrap()
            })
            .collect();
        VideoClip::new(frames, FrameRate::new(24, 1).unwrap(), "tex").unwrap()
    }

    #[test]
    fn names_round_trip() {
        for f in Feature::ALL {
            assert_eq!(f.name().parse::<Feature>().unwrap(), f);
        }
        assert!("nope".parse::<Feature>().is_err());
    }

    #[test]
    fn identical_clips_with_stubs() {
        let c = textured_clip(1, 3).with_bitrate(Some(600.0));
        let a = assemble_features(&c, &c, &FeatureProviders::stubs()).unwrap();
        let f = a.features;
        assert_eq!((f.erqa, f.lpips, f.erqa_x_lpips), (1.0, 0.0, 0.0));
        assert_eq!(f.erqa_x_mdtvsfa, f.mdtvsfa);
        assert_eq!(f.bitrate_kbps, 600.0);
        assert!(!a.bitrate_missing);
    }

    #[test]
    fn fixture_pair_matches_composed_oracles() {
        let r = textured_clip(2, 2);
        let d = textured_clip(5, 2);
        let a = assemble_features(&r, &d, &FeatureProviders::stubs()).unwrap();
        assert!(a.bitrate_missing);

        let frames = r.frames().iter().zip(d.frames());
        let erqa: f64 = frames.clone().map(|(x, y)| erqa_score(x, y, 1).unwrap().value).sum::<f64>() / 2.0;
        let lpips: f64 = frames.map(|(x, y)| stub_lpips_frame(x, y)).sum::<f64>() / 2.0;
        let mdtvsfa: f64 = d.frames().iter().map(stub_mdtvsfa_frame).sum::<f64>() / 2.0;
        let si = d
            .frames()
            .iter()
            .map(|f| {
                let m = sobel_magnitude_interior(&f.luma());
                let mean = m.iter().sum::<f64>() / m.len() as f64;
                (m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m.len() as f64).sqrt()
            })
            .fold(f64::MIN, f64::max);
        let color = d.frames().iter().map(frame_colorfulness).sum::<f64>() / 2.0;
        let f = a.features;
        let expect = [erqa, lpips, mdtvsfa, erqa * lpips, erqa * mdtvsfa, si, f.ti, color, 0.0];
        for (got, want) in f.to_array().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!(f.ti > 0.0);
    }

    #[test]
    fn errors_name_the_feature() {
        let a = textured_clip(1, 1);
        let small = VideoClip::new(
            vec![Frame::from_luma(8, 8, vec![0; 64]).unwrap()],
            FrameRate::new(24, 1).unwrap(),
            "s",
        )
        .unwrap();
        let err = assemble_features(&a, &small, &FeatureProviders::stubs()).unwrap_err();
        assert!(err.to_string().starts_with("feature `erqa`"), "{err}");
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let samples = vec![
            TrainingSample {
                features: FeatureVector::from_base(0.5, 0.25, 0.75, 10.0, 2.0, 30.5, 1000.0),
                subjective_score: 0.3,
                group_id: "crowd_run".into(),
            },
            TrainingSample {
                features: FeatureVector::from_base(0.1, 0.2, 0.3, 4.0, 5.0, 6.0, 0.0),
                subjective_score: 1.0,
                group_id: "park, joy".into(),
            },
        ];
        write_feature_table(&path, &samples).unwrap();
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with(
            "erqa,lpips,mdtvsfa,erqa_x_lpips,erqa_x_mdtvsfa,si,ti,colorfulness,bitrate_kbps,subjective_score,group_id"
        ));
        assert_eq!(read_feature_table(&path).unwrap(), samples);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn products_hold_on_random_clips(s1 in 0u32..500, s2 in 0u32..500) {
            let a = assemble_features(&textured_clip(s1, 1), &textured_clip(s2, 1), &FeatureProviders::stubs()).unwrap();
            prop_assert!(a.features.products_consistent());
            prop_assert!(a.features.is_finite());
        }
    }
}
