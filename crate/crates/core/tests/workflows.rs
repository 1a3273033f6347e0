use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srvqa_core::analysis::{kmeans_select, spearman, VideoFeatures};
use srvqa_core::fusion::{
    assemble_features, predict, read_feature_table, train_model, write_feature_table, Feature, FeatureProviders, FeatureVector,
    FusionModel, SvrParams, TrainingSample,
};
use srvqa_core::media::{
    bicubic_resize, read_png_sequence, read_y4m_file, write_png_sequence, write_y4m_file, Frame, FrameRate, PixelFormat, Plane,
    VideoClip,
};
use srvqa_core::subjective::{
    bradley_terry_fit, filter_participants, read_votes, rescale_scores, schedule_pairs, write_votes, Choice, PairId, ScheduleParams,
    SlotKind, VerificationPair, Vote,
};

fn clip(w: usize, h: usize, n: usize, seed: u64) -> VideoClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..n)
        .map(|_| {
            let planes = (0..3).map(|_| Plane::new(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap()).collect();
            Frame::new(w, h, PixelFormat::Yuv444, planes).unwrap()
        })
        .collect();
    VideoClip::new(frames, FrameRate::new(30000, 1001).unwrap(), "src").unwrap()
}

#[test]
fn y4m_and_png_carry_the_same_clip() {
    let dir = tempfile::tempdir().unwrap();
    let original = clip(12, 8, 3, 1);
    let y4m = dir.path().join("a.y4m");
    write_y4m_file(&original, &y4m).unwrap();
    let back = read_y4m_file(&y4m).unwrap();
    assert_eq!(back.frames(), original.frames());
    assert_eq!(back.fps(), original.fps());

    // PNG goes through RGB, so compare after the same conversion
    let png_dir = dir.path().join("frames");
    write_png_sequence(&back, &png_dir).unwrap();
    let rgb = read_png_sequence(&png_dir, "*.png").unwrap();
    assert_eq!(rgb.len(), 3);
    assert!(rgb.format().is_rgb());
    for (a, b) in rgb.frames().iter().zip(back.frames()) {
        assert_eq!(a, &b.to_rgb());
    }
}

#[test]
fn trained_model_survives_disk_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples: Vec<TrainingSample> = (0..60)
        .map(|i| {
            let b: Vec<f64> = (0..6).map(|_| rng.random()).collect();
            let f = FeatureVector::from_base(b[0], b[1], b[2], b[3], b[4], b[5], 100.0 + 4000.0 * rng.random::<f64>());
            TrainingSample {
                subjective_score: 0.5 * f.erqa - 0.3 * f.lpips + 0.2 * f.si + 0.3,
                features: f,
                group_id: format!("g{}", i / 6),
            }
        })
        .collect();
    let table = dir.path().join("features.csv");
    write_feature_table(&table, &samples).unwrap();
    let loaded = read_feature_table(&table).unwrap();
    assert_eq!(loaded, samples);

    let model = train_model(&loaded, &Feature::DEFAULT_ACTIVE, &SvrParams::default()).unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let again = FusionModel::load(&path).unwrap();
    assert_eq!(again, model);
    let preds: Vec<f64> = samples.iter().map(|s| predict(&again, &s.features)).collect();
    let truth: Vec<f64> = samples.iter().map(|s| s.subjective_score).collect();
    assert!(spearman(&preds, &truth).unwrap() > 0.9);
}

#[test]
fn features_of_an_upscaled_clip() {
    let reference = clip(32, 24, 3, 3);
    let distorted = reference
        .map_frames(|f| bicubic_resize(&bicubic_resize(f, 16, 12)?, 32, 24))
        .unwrap()
        .with_bitrate(Some(750.0));
    let a = assemble_features(&reference, &distorted, &FeatureProviders::stubs()).unwrap();
    assert!(!a.bitrate_missing);
    assert_eq!(a.features.bitrate_kbps, 750.0);
    assert!(a.features.is_finite() && a.features.products_consistent());
    assert!(a.features.erqa < 1.0);
    let same = assemble_features(&reference, &reference, &FeatureProviders::stubs()).unwrap();
    assert_eq!(same.features.erqa, 1.0);
    assert!(same.bitrate_missing);
}

#[test]
fn scheduled_study_to_scores() {
    let methods: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let clips = vec!["x".to_owned(), "y".to_owned()];
    let pool = vec![VerificationPair {
        pair: PairId::new("check", "ref", "broken").unwrap(),
        answer: Choice::A,
    }];
    let params = ScheduleParams {
        views_per_pair: 6,
        session_size: 10,
        verification_per_session: 2,
        seed: 4,
    };
    let plan = schedule_pairs(&methods, &clips, &params, &pool).unwrap();
    for n in plan.scored_counts().values() {
        assert_eq!(*n, 6);
    }
    let key = plan.verification_key();
    let strength = |m: &str| match m {
        "a" => 3.0,
        "b" => 2.0,
        _ => 1.0,
    };
    let mut votes = Vec::new();
    for (i, s) in plan.sessions.iter().enumerate() {
        let pid = format!("p{i}");
        for slot in &s.slots {
            let choice = match slot.kind {
                SlotKind::Verification if i == 0 => Choice::Tie,
                SlotKind::Verification => key.answer(&slot.pair).unwrap(),
                _ if strength(&slot.pair.a) >= strength(&slot.pair.b) => Choice::A,
                _ => Choice::B,
            };
            votes.push(Vote::new(pid.clone(), slot.pair.clone(), choice, slot.kind == SlotKind::Verification, 0));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("votes.jsonl");
    write_votes(&log, &votes).unwrap();
    let f = filter_participants(&read_votes(&log).unwrap(), &key).unwrap();
    assert_eq!(f.excluded_participants, vec!["p0".to_owned()]);
    for clip in &clips {
        let fit = bradley_terry_fit(&f.retained, clip).unwrap();
        let r = rescale_scores(&fit);
        assert_eq!(r.score("a"), Some(1.0));
        assert_eq!(r.score("c"), Some(0.0));
        assert!(r.score("b").unwrap() > 0.0 && r.score("b").unwrap() < 1.0);
    }
}

#[test]
fn curation_picks_one_video_per_cluster() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
    let videos: Vec<VideoFeatures> = (0..30)
        .map(|i| {
            let c = centers[i % 3];
            VideoFeatures {
                id: format!("v{i:02}"),
                values: vec![c[0] + rng.random_range(-0.5..0.5), c[1] + rng.random_range(-0.5..0.5)],
            }
        })
        .collect();
    let sel = kmeans_select(&videos, 3, 9).unwrap();
    assert_eq!(sel.selected.len(), 3);
    let picked: std::collections::BTreeSet<usize> = sel
        .selected
        .iter()
        .map(|id| id[1..].parse::<usize>().unwrap() % 3)
        .collect();
    assert_eq!(picked.len(), 3);
    for (i, a) in sel.assignments.iter().enumerate() {
        assert_eq!(*a, sel.assignments[i % 3]);
    }
}
