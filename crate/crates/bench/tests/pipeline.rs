use std::path::Path;
use std::time::Instant;

use srvqa_bench::adapters::{sr_adapter, FRAME_PATTERN};
use srvqa_bench::config::{BuiltinSr, PipelineConfig, SrSpec};
use srvqa_bench::pipeline::run_pipeline;
use srvqa_bench::report::validate_report;
use srvqa_bench::BenchError;
use srvqa_core::media::{read_png_sequence, read_y4m_file, write_png_sequence, write_y4m_file, Frame, FrameRate, PixelFormat, Plane, VideoClip};

fn textured(w: usize, h: usize, frames: usize, format: PixelFormat) -> VideoClip {
    let frames = (0..frames)
        .map(|t| {
            let luma: Vec<u8> = (0..w * h).map(|i| ((i % w) * 7 + (i / w) * 3 + t * 5) as u8).collect();
            let (cw, ch) = format.plane_dims(1, w, h);
            let planes = vec![
                Plane::new(w, h, luma).unwrap(),
                Plane::filled(cw, ch, 120),
                Plane::filled(cw, ch, 136),
            ];
            Frame::new(w, h, format, planes).unwrap()
        })
        .collect();
    VideoClip::new(frames, FrameRate::new(25, 1).unwrap(), "t").unwrap()
}

fn write_config(dir: &Path, body: &str) -> PipelineConfig {
    let path = dir.join("bench.toml");
    std::fs::write(&path, format!("schema_version = 1\noutput_dir = \"out\"\n{body}")).unwrap();
    PipelineConfig::load(&path).unwrap()
}

#[test]
fn two_x_method_runs_twice_for_four_x() {
    let dir = tempfile::tempdir().unwrap();
    write_y4m_file(&textured(64, 48, 3, PixelFormat::Yuv420), &dir.path().join("a.y4m")).unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
target_bitrates_kbps = [500.0]
study_bitrates_kbps = []
metrics = ["psnr", "erqa"]
[[sources]]
id = "a"
path = "a.y4m"
[[codecs]]
name = "k"
builtin = "copy"
[[sr_methods]]
name = "half"
builtin = "bicubic"
scale = 2
"#,
    );
    let run = run_pipeline(&cfg).unwrap();
    validate_report(&run.report, &cfg.output_dir).unwrap();
    let sr = cfg.output_dir.join("work/a/k/500/sr/half");
    let clip = read_png_sequence(&sr, FRAME_PATTERN).unwrap();
    assert_eq!((clip.width(), clip.height(), clip.len()), (64, 48, 3));
    let record = std::fs::read_dir(cfg.output_dir.join("cache"))
        .unwrap()
        .map(|e| std::fs::read_to_string(e.unwrap().path()).unwrap())
        .find(|t| t.contains("\"stage\": \"sr\""))
        .unwrap();
    assert!(record.contains("\"passes\": 2"), "{record}");
    // intermediate pass directories are cleaned up
    let leftovers: Vec<_> = std::fs::read_dir(sr.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers, vec![std::ffi::OsString::from("half")]);
}

#[test]
fn frame_dropping_tool_fails_its_jobs() {
    let dir = tempfile::tempdir().unwrap();
    write_y4m_file(&textured(32, 32, 4, PixelFormat::Yuv420), &dir.path().join("a.y4m")).unwrap();
    let bin = env!("CARGO_BIN_EXE_srvqa");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"
target_bitrates_kbps = [500.0, 900.0]
study_bitrates_kbps = []
metrics = ["psnr", "erqa"]
[[sources]]
id = "a"
path = "a.y4m"
[[codecs]]
name = "k"
builtin = "copy"
[[sr_methods]]
name = "lossy"
template = "{bin} resize-frames --in {{in_dir}} --out {{out_dir}} --scale {{scale}} --drop-last"
[[sr_methods]]
name = "good"
template = "{bin} resize-frames --in {{in_dir}} --out {{out_dir}} --scale {{scale}}"
"#
        ),
    );
    let run = run_pipeline(&cfg).unwrap();
    let sr_failures: Vec<_> = run.report.failures.iter().filter(|f| f.stage == "sr").collect();
    assert_eq!(sr_failures.len(), 2, "{:?}", run.report.failures);
    for f in &sr_failures {
        assert!(f.label.ends_with("/lossy"));
        assert!(f.error.contains("frame count mismatch: expected 4, found 3"), "{}", f.error);
    }
    let methods: Vec<&str> = run.report.rows.iter().map(|r| r.method.as_str()).collect();
    assert!(!methods.contains(&"lossy"));
    assert_eq!(methods.iter().filter(|m| **m == "good").count(), 2);

    // failed jobs are retried, good ones come from the cache
    let again = run_pipeline(&cfg).unwrap();
    assert_eq!(again.stats.executed, 2);
    assert_eq!(again.report.rows, run.report.rows);
}

#[test]
fn quarter_hd_upscales_to_full_hd() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    write_png_sequence(&textured(480, 270, 2, PixelFormat::Yuv444), &input).unwrap();
    let spec = SrSpec {
        name: "bicubic".into(),
        template: None,
        builtin: Some(BuiltinSr::Bicubic),
        scale: 4,
    };
    let out = dir.path().join("out");
    let o = sr_adapter(&spec, &input, &out, 4).unwrap();
    assert_eq!((o.frames, o.passes), (2, 1));
    let clip = read_png_sequence(&out, FRAME_PATTERN).unwrap();
    assert_eq!((clip.width(), clip.height()), (1920, 1080));
    assert_eq!(clip.fps(), 25.0);
}

#[test]
fn study_crops_share_one_region() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    write_y4m_file(&textured(1920, 1080, 1, PixelFormat::Yuv420), &dir.path().join("hd.y4m")).unwrap();
    let mut body = String::from(
        r#"
target_bitrates_kbps = [600.0, 1000.0, 2000.0]
study_bitrates_kbps = [600.0, 1000.0, 2000.0]
metrics = ["psnr"]
rd_quality_metric = "psnr"
include_no_sr = false
[study]
[[sources]]
id = "hd"
path = "hd.y4m"
[[codecs]]
name = "k"
builtin = "copy"
"#,
    );
    for i in 0..10 {
        body += &format!("[[sr_methods]]\nname = \"m{i}\"\nbuiltin = \"bicubic\"\n");
    }
    let cfg = write_config(dir.path(), &body);
    let run = run_pipeline(&cfg).unwrap();
    validate_report(&run.report, &cfg.output_dir).unwrap();
    assert_eq!(run.report.crops.len(), 30);
    for c in &run.report.crops {
        assert_eq!((c.region.x, c.region.y, c.region.w, c.region.h), (720, 405, 480, 270));
        let crop = read_y4m_file(&cfg.output_dir.join(&c.path)).unwrap();
        assert_eq!((crop.width(), crop.height()), (480, 270));
    }
    let reference = read_y4m_file(&cfg.output_dir.join("crops/hd/reference.y4m")).unwrap();
    assert_eq!(reference.format(), PixelFormat::Yuv444);
    eprintln!("30 crops in {:.1}s", start.elapsed().as_secs_f64());
}

#[test]
fn codec_template_needs_bitrate_placeholder() {
    let text = r#"
schema_version = 1
output_dir = "out"
[[sources]]
id = "a"
path = "a.y4m"
[[codecs]]
name = "x"
template = "x264 --input {input} -o {output}"
[[sr_methods]]
name = "b"
builtin = "bicubic"
"#;
    match PipelineConfig::from_toml_str(text, Path::new(".")) {
        Err(BenchError::Config(m)) => assert!(m.contains("{bitrate_kbps}"), "{m}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}
