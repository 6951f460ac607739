//! `rrq` command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rrq_core::error::{Error, Result};
use rrq_core::features::{
    read_features, write_features, write_features_csv, FeatureExtractor, SegmentFeatures, DEFAULT_BLOCK_SIZE,
    DEFAULT_CHUNK_FRAMES,
};
use rrq_core::lstm::{load_model, model_to_json, train_with_validation, TrainConfig, TrainSample, DEFAULT_HIDDEN_SIZE};
use rrq_core::metric::Metric;
use rrq_core::predict::{evaluate, ingest_dataset, predict_quality, EvalOptions, EvalRecord, PredictSource, Side, Split};
use rrq_core::transcode::{
    assemble_model_input, parse_bitrates, reference_latency, Ladder, LatencyProfile, TranscodeChain,
    REFERENCE_FEATURE_TIME_SECS, REFERENCE_INFERENCE_TIME_SECS,
};
use rrq_core::video_io::{FrameRate, RawYuvReader, Y4mReader};

const Y4M_MAGIC: &[u8] = b"YUV4MPEG2";

#[derive(Debug, Parser)]
#[command(name = "rrq", version, about = "Predict video quality after a chain of transcodes")]
pub struct Cli {
    /// Emit machine-readable JSON records instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract chunk features from a Y4M or raw I420 segment.
    Analyze(AnalyzeArgs),
    /// Train an LSTM model from feature files and ground-truth scores.
    Train(TrainArgs),
    /// Predict the quality of one segment after a transcoding chain.
    Predict(PredictArgs),
    /// Score a model against the held-out split of a labelled dataset.
    Evaluate(EvaluateArgs),
    /// Latency of full-reference measurement over a transcoding chain.
    Latency(LatencyArgs),
}

#[derive(Debug, Args)]
pub struct RawVideoArgs {
    /// Frame width of raw I420 input.
    #[arg(long)]
    pub width: Option<usize>,
    /// Frame height of raw I420 input.
    #[arg(long)]
    pub height: Option<usize>,
    /// Frame rate of raw I420 input, e.g. 30 or 30000/1001.
    #[arg(long, value_parser = FrameRate::parse)]
    pub fps: Option<FrameRate>,
    /// Worker threads for feature extraction [default: all cores].
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Input video (`-` for stdin).
    pub input: PathBuf,
    /// Feature CSV to write; a `.json` sidecar goes next to it. Rows go to
    /// stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// DCT block size in pixels.
    #[arg(long = "w", default_value_t = DEFAULT_BLOCK_SIZE)]
    pub block_size: usize,
    /// Frames per chunk.
    #[arg(long = "fc", default_value_t = DEFAULT_CHUNK_FRAMES)]
    pub chunk_frames: usize,
    /// Segment id written to each row [default: input file stem].
    #[arg(long)]
    pub segment_id: Option<String>,
    #[command(flatten)]
    pub raw: RawVideoArgs,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Directory of `<segment_id>.csv` feature files.
    #[arg(long)]
    pub features_dir: PathBuf,
    /// CSV with columns segment_id, chain, metric, value.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Bitrate ladder JSON [default: the built-in HLS ladder].
    #[arg(long)]
    pub ladder: Option<PathBuf>,
    /// Seed of the per-video train/test split.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Share of source videos on the training side.
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Quality metric to learn.
    #[arg(long, value_parser = parse_metric, default_value = "VMAF")]
    pub metric: Metric,
    /// Chain length M [default: the only one present in the data].
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = DEFAULT_HIDDEN_SIZE)]
    pub hidden: usize,
    /// Model file to write.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Per-epoch loss log (CSV).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Feature CSV produced by `analyze`.
    #[arg(long, conflicts_with = "video", required_unless_present = "video")]
    pub features: Option<PathBuf>,
    /// Source video to analyse on the fly.
    #[arg(long)]
    pub video: Option<PathBuf>,
    /// Stage bitrates in Mbps, e.g. 16.8,2.4.
    #[arg(long)]
    pub chain: String,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub ladder: Option<PathBuf>,
    #[command(flatten)]
    pub raw: RawVideoArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// JND threshold [default: 6 for VMAF, none otherwise].
    #[arg(long)]
    pub jnd: Option<f64>,
    /// Score every record, not just the test side.
    #[arg(long)]
    pub all: bool,
    /// Report CSV to write.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LatencyArgs {
    /// Per-stage encode times in seconds, comma-separated.
    #[arg(long, value_parser = parse_seconds, value_delimiter = ',', required = true)]
    pub encode: Vec<f64>,
    /// Per-stage decode times in seconds, comma-separated.
    #[arg(long, value_parser = parse_seconds, value_delimiter = ',', required = true)]
    pub decode: Vec<f64>,
    /// Feature extraction time in seconds.
    #[arg(long, default_value_t = REFERENCE_FEATURE_TIME_SECS)]
    pub feature: f64,
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_seconds(s: &str) -> std::result::Result<f64, String> {
    s.trim().parse().map_err(|_| format!("`{s}` is not a number of seconds"))
}

/// Parses `argv` (program name first), runs the command, and returns the
/// process exit code: 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let json = cli.json;
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = if json {
                writeln!(err, "{}", json!({"error": e.name(), "message": e.to_string()}))
            } else {
                writeln!(err, "error: {}: {e}", e.name())
            };
            1
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let json = cli.json;
    match cli.command {
        Command::Analyze(a) => analyze(&a, json, out),
        Command::Train(a) => train_cmd(&a, json, out),
        Command::Predict(a) => predict_cmd(&a, json, out),
        Command::Evaluate(a) => evaluate_cmd(&a, json, out),
        Command::Latency(a) => latency(&a, json, out),
    }
}

fn emit(out: &mut dyn Write, value: serde_json::Value) -> Result<()> {
    writeln!(out, "{value}")?;
    Ok(())
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(Box::new(BufReader::with_capacity(1 << 20, file)))
}

fn segment_id_for(path: &Path, explicit: Option<&str>) -> String {
    explicit.map(str::to_owned).unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .filter(|s| s != "-")
            .unwrap_or_else(|| "stdin".to_owned())
    })
}

/// Extracts features from a Y4M stream, or from raw I420 when the stream
/// lacks the Y4M signature.
fn extract_video(
    path: &Path,
    segment_id: &str,
    extractor: &FeatureExtractor,
    raw: &RawVideoArgs,
) -> Result<SegmentFeatures> {
    let mut input = open_input(path)?;
    let is_y4m = input.fill_buf()?.starts_with(Y4M_MAGIC);
    if is_y4m {
        extractor.extract_frames(segment_id, Y4mReader::new(input)?)
    } else {
        let (Some(w), Some(h)) = (raw.width, raw.height) else {
            return Err(Error::InvalidArgument(format!(
                "{} is not a Y4M stream; raw I420 input needs --width and --height",
                path.display()
            )));
        };
        extractor.extract_frames(segment_id, RawYuvReader::new(input as Box<dyn Read>, w, h)?)
    }
}

fn analyze(a: &AnalyzeArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let extractor = FeatureExtractor::new(a.block_size, a.chunk_frames)?.with_threads(a.raw.threads);
    let id = segment_id_for(&a.input, a.segment_id.as_deref());
    let start = Instant::now();
    let features = extract_video(&a.input, &id, &extractor, &a.raw)?;
    let feature_secs = start.elapsed().as_secs_f64();
    let duration = a.raw.fps.map(|f| features.meta.frame_count as f64 / f.as_f64());

    match &a.output {
        None => {
            write_features_csv(&features, &mut *out)?;
            log::info!("feature extraction took {feature_secs:.3} s");
        }
        Some(path) => {
            write_features(&features, path)?;
            if json {
                emit(
                    out,
                    json!({
                        "segment_id": features.segment_id,
                        "output": path,
                        "T": features.chunk_count(),
                        "frame_count": features.meta.frame_count,
                        "width": features.meta.width,
                        "height": features.meta.height,
                        "feature_secs": feature_secs,
                        "duration_secs": duration,
                    }),
                )?;
            } else {
                writeln!(
                    out,
                    "{}: {} frames {}x{} -> {} chunks in {}",
                    features.segment_id,
                    features.meta.frame_count,
                    features.meta.width,
                    features.meta.height,
                    features.chunk_count(),
                    path.display()
                )?;
                writeln!(
                    out,
                    "feature extraction: {feature_secs:.3} s (reference {REFERENCE_FEATURE_TIME_SECS} s)"
                )?;
            }
        }
    }
    Ok(())
}

fn load_ladder(path: Option<&Path>) -> Result<Ladder> {
    path.map_or_else(|| Ok(Ladder::default()), Ladder::from_json_file)
}

fn load_dataset(d: &DatasetArgs) -> Result<(Vec<EvalRecord>, Split)> {
    let ladder = load_ladder(d.ladder.as_deref())?;
    let split = Split::new(d.split_seed, d.train_fraction)?;
    let ingested = ingest_dataset(&d.features_dir, &d.ground_truth, &ladder)?;
    if !ingested.skipped.is_empty() {
        log::warn!("skipped {} ground-truth rows", ingested.skipped.len());
    }
    Ok((ingested.records, split))
}

fn train_cmd(a: &TrainArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let (records, split) = load_dataset(&a.data)?;
    let mut records: Vec<EvalRecord> = records.into_iter().filter(|r| r.metric == a.metric).collect();
    let stages = match a.stages {
        Some(m) => m,
        None => {
            let mut lengths: Vec<usize> = records.iter().map(|r| r.chain.len()).collect();
            lengths.sort_unstable();
            lengths.dedup();
            match lengths.as_slice() {
                [m] => *m,
                [] => return Err(Error::EmptyDataset(format!("no {} records", a.metric))),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "records mix chain lengths {lengths:?}; pick one with --stages"
                    )))
                }
            }
        }
    };
    records.retain(|r| r.chain.len() == stages);
    let first = records
        .first()
        .ok_or_else(|| Error::EmptyDataset(format!("no {} records with M={stages}", a.metric)))?;
    let meta = first.features.meta;
    if let Some(r) = records
        .iter()
        .find(|r| (r.features.meta.block_size, r.features.meta.chunk_frames) != (meta.block_size, meta.chunk_frames))
    {
        return Err(Error::InvalidArgument(format!(
            "{} was extracted with w={} f_c={}, expected w={} f_c={}",
            r.segment_id, r.features.meta.block_size, r.features.meta.chunk_frames, meta.block_size, meta.chunk_frames
        )));
    }

    let mut train_set = Vec::new();
    let mut val_set = Vec::new();
    for r in &records {
        let sample = TrainSample {
            input: assemble_model_input(&r.features, &r.chain)?,
            target: r.ground_truth,
        };
        match split.side(&r.segment_id) {
            Side::Train => train_set.push(sample),
            Side::Test => val_set.push(sample),
        }
    }
    let config = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        batch_size: a.batch,
        seed: a.seed,
        hidden_size: a.hidden,
        metric: a.metric,
        block_size: meta.block_size,
        chunk_frames: meta.chunk_frames,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let trained = train_with_validation(&train_set, &val_set, &config)?;
    let train_secs = start.elapsed().as_secs_f64();

    std::fs::write(&a.output, model_to_json(&trained.model)?).map_err(|e| Error::io(&a.output, e))?;
    if let Some(log_path) = &a.log {
        std::fs::write(log_path, trained.history_csv()).map_err(|e| Error::io(log_path, e))?;
    }
    let last = trained.history.last();
    if json {
        emit(
            out,
            json!({
                "model": a.output,
                "metric": a.metric,
                "M": stages,
                "T": trained.model.header.steps,
                "train_samples": train_set.len(),
                "validation_samples": val_set.len(),
                "epochs": a.epochs,
                "train_mae": last.map(|s| s.train_mae),
                "val_mae": last.and_then(|s| s.val_mae),
                "train_secs": train_secs,
            }),
        )?;
    } else {
        writeln!(
            out,
            "trained {} M={} on {} samples ({} held out) in {train_secs:.1} s",
            a.metric,
            stages,
            train_set.len(),
            val_set.len()
        )?;
        if let Some(s) = last {
            match s.val_mae {
                Some(v) => writeln!(out, "epoch {}: train MAE {:.4}, held-out MAE {v:.4}", s.epoch, s.train_mae)?,
                None => writeln!(out, "epoch {}: train MAE {:.4}", s.epoch, s.train_mae)?,
            }
        }
        writeln!(out, "model written to {}", a.output.display())?;
    }
    Ok(())
}

fn predict_cmd(a: &PredictArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let ladder = load_ladder(a.ladder.as_deref())?;
    let chain = TranscodeChain::from_mbps(&parse_bitrates(&a.chain)?, &ladder)?;
    let mut feature_secs = None;
    let features = match (&a.features, &a.video) {
        (Some(path), _) => read_features(path)?,
        (None, Some(path)) => {
            let extractor = FeatureExtractor::new(model.header.block_size, model.header.chunk_frames)?
                .with_threads(a.raw.threads);
            let start = Instant::now();
            let f = extract_video(path, &segment_id_for(path, None), &extractor, &a.raw)?;
            feature_secs = Some(start.elapsed().as_secs_f64());
            f
        }
        (None, None) => unreachable!("clap requires --features or --video"),
    };
    let start = Instant::now();
    let score = predict_quality(PredictSource::Features(&features), &chain, &model)?;
    let inference_secs = start.elapsed().as_secs_f64();

    if json {
        emit(
            out,
            json!({
                "segment_id": score.segment_id,
                "chain": score.chain,
                "metric": score.metric,
                "value": score.value,
                "feature_secs": feature_secs,
                "inference_secs": inference_secs,
            }),
        )?;
    } else {
        writeln!(out, "{} {}", score.metric, score.value)?;
        if let Some(t) = feature_secs {
            writeln!(out, "feature extraction: {t:.3} s (reference {REFERENCE_FEATURE_TIME_SECS} s)")?;
        }
        writeln!(
            out,
            "inference: {:.3} ms (reference {} ms)",
            inference_secs * 1e3,
            REFERENCE_INFERENCE_TIME_SECS * 1e3
        )?;
    }
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let (records, split) = load_dataset(&a.data)?;
    let options = EvalOptions {
        jnd: a.jnd,
        include_train: a.all,
    };
    let report = evaluate(&records, &model, &split, &options)?;
    if let Some(path) = &a.output {
        std::fs::write(path, report.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    if json {
        let rows: Vec<_> = report
            .rows
            .iter()
            .map(|r| {
                json!({
                    "rung": r.rung,
                    "resolution": r.resolution,
                    "mbps": r.mbps,
                    "n": r.n,
                    "r2": r.r2,
                    "mae": r.mae,
                    "jnd_violations": r.jnd_violations,
                })
            })
            .collect();
        emit(
            out,
            json!({
                "metric": report.metric,
                "M": report.stages,
                "rows": rows,
                "average_r2": report.average_r2,
                "average_mae": report.average_mae,
                "pooled_r2": report.pooled_r2,
                "pooled_mae": report.pooled_mae,
                "jnd": report.jnd,
                "jnd_violation_rate": report.jnd_violation_rate,
            }),
        )?;
    } else {
        write!(out, "{}", report.to_table())?;
    }
    Ok(())
}

fn latency(a: &LatencyArgs, json: bool, out: &mut dyn Write) -> Result<()> {
    let stages = a.encode.len();
    let profile = LatencyProfile::new(a.encode.clone(), a.decode.clone(), a.feature)?;
    let total = reference_latency(&profile, stages)?;
    if json {
        emit(out, json!({"M": stages, "latency_secs": total}))?;
    } else {
        writeln!(out, "{}", (total * 1e9).round() / 1e9)?;
    }
    Ok(())
}
