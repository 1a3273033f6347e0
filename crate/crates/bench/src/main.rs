use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;
use srvqa_core::analysis::{bsq_rate, kmeans_select, RDCurve, VideoFeatures};
use srvqa_core::erqa::ErqaParams;
use srvqa_core::fusion::{
    ablate_feature_pairs, assemble_features, cross_validate, predict, read_feature_table, train_model, Feature, FeatureProviders,
    FoldMode, FusionModel, SvrParams,
};
use srvqa_core::media::{read_png_sequence, read_y4m_file, VideoClip};
use srvqa_core::subjective::{bradley_terry_fit, filter_participants, read_votes, rescale_scores, VerificationKey};
use srvqa_bench::adapters::{resize_frames, FRAME_PATTERN};
use srvqa_bench::config::{PipelineConfig, WORKERS_ENV};
use srvqa_bench::pipeline::run_pipeline;
use srvqa_bench::report::validate_report;
use srvqa_bench::server::{serve, StudyManifest, StudyState};

#[derive(Parser)]
#[command(name = "srvqa", version, about = "Quality assessment and benchmarking for super-resolved compressed video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Features and fused score of one reference/distorted pair.
    Score {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        distorted: PathBuf,
        /// Fusion model JSON; without it only features are printed.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        bitrate_kbps: Option<f64>,
        #[arg(long, default_value_t = 1)]
        shift_radius: usize,
    },
    /// Fit a fusion model on a feature table.
    Train {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated feature names; default is the seven-feature set.
        #[arg(long, value_delimiter = ',')]
        features: Vec<Feature>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Also report grouped k-fold correlations.
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Cross-validate with every pair of candidate features removed.
    Ablate {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<Feature>,
        #[arg(long, default_value_t = 3)]
        folds: usize,
    },
    /// Run the benchmark pipeline from a TOML config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (also settable through SRVQA_WORKERS).
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        /// Write a study manifest over the produced crops.
        #[arg(long)]
        study_manifest: Option<PathBuf>,
    },
    /// BSQ-rate of a test RD curve against a reference curve (CSV: bitrate_kbps,quality).
    Bsq {
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Bradley-Terry scores per clip from a JSONL vote log.
    Bt {
        #[arg(long)]
        votes: PathBuf,
        /// Study manifest whose verification pairs filter participants.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Pick representative videos by k-means (CSV: id, feature columns...).
    Curate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 9)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the session plan of a study manifest as JSON.
    Schedule {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Serve the study HTTP API.
    ServeStudy {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Bicubic upscale of a PNG frame directory (mock SR tool).
    #[command(hide = true)]
    ResizeFrames {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(long)]
        drop_last: bool,
    },
}

fn print_json<T: Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn load_clip(path: &Path) -> anyhow::Result<VideoClip> {
    let clip = if path.is_dir() {
        read_png_sequence(path, FRAME_PATTERN)
    } else {
        read_y4m_file(path)
    };
    clip.with_context(|| format!("reading {}", path.display()))
}

fn read_curve(path: &Path) -> anyhow::Result<RDCurve> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut points = Vec::new();
    for r in rdr.deserialize::<(f64, f64)>() {
        points.push(r?);
    }
    let label = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok(RDCurve::new(label, &points)?)
}

fn read_video_features(path: &Path) -> anyhow::Result<Vec<VideoFeatures>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (line, r) in rdr.records().enumerate() {
        let r = r?;
        let Some(id) = r.get(0) else { continue };
        let values = r
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {}", path.display(), line + 2))?;
        out.push(VideoFeatures { id: id.to_owned(), values });
    }
    Ok(out)
}

fn svr_params(c: Option<f64>, epsilon: Option<f64>) -> SvrParams {
    let mut p = SvrParams::default();
    if let Some(c) = c {
        p.c = c;
    }
    if let Some(e) = epsilon {
        p.epsilon = e;
    }
    p
}

#[derive(Serialize)]
struct ClipScores {
    clip: String,
    methods: Vec<String>,
    log_abilities: Vec<f64>,
    rescaled: Vec<f64>,
    sweeps: usize,
    smoothed: bool,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Score {
            reference,
            distorted,
            model,
            bitrate_kbps,
            shift_radius,
        } => {
            let r = load_clip(&reference)?;
            let mut d = load_clip(&distorted)?;
            if bitrate_kbps.is_some() {
                d = d.with_bitrate(bitrate_kbps);
            }
            let providers = FeatureProviders {
                erqa: ErqaParams::with_shift_radius(shift_radius),
                ..FeatureProviders::stubs()
            };
            let a = assemble_features(&r, &d, &providers)?;
            let score = match model {
                Some(m) => Some(predict(&FusionModel::load(&m)?, &a.features)),
                None => None,
            };
            print_json(&serde_json::json!({ "features": a.features, "bitrate_missing": a.bitrate_missing, "score": score }))
        }
        Command::Train {
            table,
            out,
            features,
            c,
            epsilon,
            folds,
        } => {
            let samples = read_feature_table(&table)?;
            let active = if features.is_empty() { Feature::DEFAULT_ACTIVE.to_vec() } else { features };
            let params = svr_params(c, epsilon);
            let model = train_model(&samples, &active, &params)?;
            model.save(&out)?;
            log::info!("model with {} features written to {}", active.len(), out.display());
            if let Some(k) = folds {
                print_json(&cross_validate(&samples, k, &active, &params, FoldMode::Grouped)?)?;
            }
            Ok(())
        }
        Command::Ablate { table, candidates, folds } => {
            let samples = read_feature_table(&table)?;
            let candidates = if candidates.is_empty() { Feature::ALL.to_vec() } else { candidates };
            print_json(&ablate_feature_pairs(&samples, &candidates, folds, &SvrParams::default(), FoldMode::Grouped)?)
        }
        Command::Bench {
            config,
            workers,
            study_manifest,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if workers.is_some() {
                cfg.workers = workers;
            }
            let run = run_pipeline(&cfg)?;
            validate_report(&run.report, &cfg.output_dir)?;
            if let Some(path) = study_manifest {
                let m = StudyManifest::from_crops(&run.report.crops, &cfg.output_dir, cfg.output_dir.join("votes.jsonl"), cfg.seed);
                std::fs::write(&path, serde_json::to_string_pretty(&m)?)?;
            }
            eprintln!(
                "{} jobs: {} cached, {} executed, {} failed; report in {}",
                run.stats.jobs,
                run.stats.cache_hits,
                run.stats.executed,
                run.report.failures.len(),
                run.report_dir.display()
            );
            Ok(())
        }
        Command::Bsq { test, reference } => print_json(&bsq_rate(&read_curve(&test)?, &read_curve(&reference)?)?),
        Command::Bt { votes, manifest } => {
            let mut all = read_votes(&votes)?;
            if let Some(m) = manifest {
                let state = StudyState::new(&StudyManifest::load(&m)?)?;
                let key: VerificationKey = state.plan().verification_key();
                let f = filter_participants(&all, &key)?;
                eprintln!(
                    "{} of {} participants excluded",
                    f.excluded_participants.len(),
                    f.total_participants
                );
                all = f.retained;
            }
            let mut clips: Vec<String> = all.iter().filter(|v| !v.is_verification).map(|v| v.pair_id.clip.clone()).collect();
            clips.sort();
            clips.dedup();
            let mut out = Vec::new();
            for clip in clips {
                let fit = bradley_terry_fit(&all, &clip)?;
                let rescaled = rescale_scores(&fit);
                out.push(ClipScores {
                    clip,
                    methods: fit.methods.clone(),
                    log_abilities: fit.log_abilities.clone(),
                    rescaled: rescaled.scores,
                    sweeps: fit.sweeps,
                    smoothed: fit.smoothed,
                });
            }
            print_json(&out)
        }
        Command::Curate { features, k, seed } => print_json(&kmeans_select(&read_video_features(&features)?, k, seed)?),
        Command::Schedule { manifest } => {
            let state = StudyState::new(&StudyManifest::load(&manifest)?)?;
            let plan = state.plan();
            let counts: BTreeMap<String, usize> = plan.scored_counts().into_iter().map(|(p, n)| (p.to_string(), n)).collect();
            eprintln!("{} sessions, {} scored assignments", plan.sessions.len(), plan.total_scored);
            print_json(&serde_json::json!({ "plan": plan, "views": counts }))
        }
        Command::ServeStudy { manifest, addr } => {
            let m = StudyManifest::load(&manifest)?;
            tokio::runtime::Runtime::new()?.block_on(serve(&m, &addr))
        }
        Command::ResizeFrames {
            input,
            output,
            scale,
            drop_last,
        } => {
            if !matches!(scale, 2 | 4) {
                bail!("scale must be 2 or 4");
            }
            resize_frames(&input, &output, scale, drop_last)?;
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
