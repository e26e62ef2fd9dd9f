//! `maskemo` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime failure.
//! Relative output paths resolve against `$MASKEMO_OUTPUT_ROOT` when it is set.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use maskemo_core::dataset::{generate_synthetic_corpus, CorpusSpec, GeometryConfig, Split};
use maskemo_core::harness::{
    bench, crop_body_video, evaluate_checkpoint, explain_video, mask_effect_study, mask_video, run_experiment, Modality, RunConfig, RunStatus,
    StudyConfig,
};
use maskemo_core::{Aggregator, Architecture, Emotion, MaskConfig};

const OUTPUT_ROOT_ENV: &str = "MASKEMO_OUTPUT_ROOT";

/// Marks an error as caused by user input (exit code 1).
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "maskemo", version, about = "Emotion recognition from masked faces and bodies in video")]
struct Cli {
    /// Root for relative output paths.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV)]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a deterministic synthetic corpus with landmarks and a manifest.
    GenSynthetic(GenArgs),
    /// Draw the synthetic face mask on every frame of a video.
    MaskApply(MaskArgs),
    /// Crop the body of every frame with the face blacked out.
    CropBody(CropArgs),
    /// Train a model and evaluate its best validation epoch.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a manifest.
    Eval(EvalArgs),
    /// Write Grad-CAM overlays for one video.
    Explain(ExplainArgs),
    /// Compare default and masked input over segment counts and modalities.
    StudyMaskEffect(StudyArgs),
    /// Measure training and validation seconds per epoch for several segment counts.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 32)]
    clips: usize,
    #[arg(long, default_value_t = 24)]
    frames: usize,
    /// Frame size as WIDTHxHEIGHT.
    #[arg(long, default_value = "32x32", value_parser = parse_size)]
    size: (u32, u32),
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Draw this label's signal on the mouth, where the mask covers it.
    #[arg(long)]
    mouth_label: Option<Emotion>,
    /// Probability that a frame's face landmarks are dropped.
    #[arg(long, default_value_t = 0.0)]
    landmark_dropout: f64,
}

#[derive(Args, Debug)]
struct MaskArgs {
    #[arg(long)]
    video: PathBuf,
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fill color as R,G,B.
    #[arg(long, value_parser = parse_color)]
    color: Option<[u8; 3]>,
    /// Yaw ratio threshold between frontal and profile jaw candidates.
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Args, Debug)]
struct CropArgs {
    #[arg(long)]
    video: PathBuf,
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Total growth of the keypoint box per dimension.
    #[arg(long, default_value_t = 0.10)]
    expansion: f64,
    /// Keep the face instead of blacking it out.
    #[arg(long)]
    keep_face: bool,
}

/// Flags that override fields of a run configuration.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// TOML run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    modality: Option<Modality>,
    #[arg(long)]
    mask: Option<bool>,
    #[arg(long)]
    shift_fraction: Option<f64>,
    #[arg(long, value_parser = parse_aggregator)]
    aggregator: Option<Aggregator>,
    /// `tiny` or `resnet50`.
    #[arg(long, value_parser = parse_architecture)]
    architecture: Option<Architecture>,
    #[arg(long)]
    input_size: Option<u32>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    track_train_auc: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    run: Overrides,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    split: Split,
    /// Override whether frames are masked before cropping.
    #[arg(long)]
    mask: Option<bool>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    video: PathBuf,
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// Emotion name or index.
    #[arg(long)]
    label: Emotion,
    /// Stream of a fusion checkpoint (`face` or `body`); defaults to the first.
    #[arg(long)]
    stream: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[command(flatten)]
    run: Overrides,
    /// Segment counts, comma separated.
    #[arg(long = "grid-segments", value_delimiter = ',', default_values_t = [1, 3, 5, 10])]
    grid_segments: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [Modality::Face, Modality::FullBody])]
    modalities: Vec<Modality>,
    /// Run both columns unmasked (sanity check: all deltas are zero).
    #[arg(long)]
    no_mask: bool,
    #[arg(long)]
    focus_label: Option<Emotion>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    run: Overrides,
    /// Segment counts, comma separated; pass the flag without values for an empty grid.
    #[arg(long = "grid-segments", value_delimiter = ',', num_args = 0.., default_values_t = [1, 3, 5, 10])]
    grid_segments: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    bench_epochs: usize,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("bad size '{s}': {e}"));
    Ok((parse(w)?, parse(h)?))
}

fn parse_color(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected R,G,B, got '{s}'"));
    }
    let mut out = [0u8; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("bad color component '{p}': {e}"))?;
    }
    Ok(out)
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::ALL.into_iter().find(|x| x.to_string() == s).ok_or_else(|| format!("unknown split '{s}' (train, val, test)"))
}

fn parse_aggregator(s: &str) -> Result<Aggregator, String> {
    match s {
        "average" => Ok(Aggregator::Average),
        "maximum" => Ok(Aggregator::Maximum),
        _ => Err(format!("unknown aggregator '{s}' (average, maximum)")),
    }
}

fn parse_architecture(s: &str) -> Result<Architecture, String> {
    match s {
        "tiny" => Ok(Architecture::tiny()),
        "resnet50" => Ok(Architecture::Resnet50),
        _ => Err(format!("unknown architecture '{s}' (tiny, resnet50)")),
    }
}

fn resolve(root: Option<&Path>, path: &Path) -> PathBuf {
    match root {
        Some(r) if path.is_relative() => r.join(path),
        _ => path.to_path_buf(),
    }
}

impl Overrides {
    fn build(&self, root: Option<&Path>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| config_err(e.to_string()))?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident).+ <- $value:expr) => {
                if let Some(v) = $value.clone() {
                    cfg.$($field).+ = v;
                }
            };
        }
        set!(name <- self.name);
        set!(manifest <- self.manifest);
        set!(output_dir <- self.output_dir);
        set!(segments <- self.segments);
        set!(modality <- self.modality);
        set!(mask <- self.mask);
        set!(fusion.aggregator <- self.aggregator);
        set!(architecture <- self.architecture);
        set!(input_size <- self.input_size);
        set!(optimizer.epochs <- self.epochs);
        set!(optimizer.lr <- self.lr);
        set!(optimizer.batch_size <- self.batch_size);
        set!(seed <- self.seed);
        if self.shift_fraction.is_some() {
            cfg.shift_fraction = self.shift_fraction;
        }
        cfg.track_train_auc |= self.track_train_auc;
        cfg.output_dir = resolve(root, &cfg.output_dir);
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        if !cfg.manifest.exists() {
            return Err(config_err(format!("manifest {} does not exist", cfg.manifest.display())));
        }
        Ok(cfg)
    }
}

fn write_json(path: &Path, value: serde_json::Value) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, serde_json::to_string_pretty(&value)?).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let root = cli.output_root.as_deref();
    match cli.command {
        Command::GenSynthetic(a) => {
            let spec = CorpusSpec {
                clips: a.clips,
                frames: a.frames,
                width: a.size.0,
                height: a.size.1,
                seed: a.seed,
                mouth_label: a.mouth_label,
                landmark_dropout: a.landmark_dropout,
                ..CorpusSpec::default()
            };
            if spec.clips == 0 || spec.frames == 0 || spec.width < 16 || spec.height < 16 {
                return Err(config_err("need at least one clip and frame, and frames of at least 16x16"));
            }
            let out = resolve(root, &a.out);
            let corpus = generate_synthetic_corpus(&spec, &out)?;
            println!("{}", corpus.manifest_path.display());
        }
        Command::MaskApply(a) => {
            let mut cfg = MaskConfig::default();
            if let Some(c) = a.color {
                cfg.fill_color = c;
            }
            if let Some(t) = a.theta {
                if !(0.0..=0.5).contains(&t) {
                    return Err(config_err(format!("--theta must lie in [0, 0.5], got {t}")));
                }
                cfg.theta = t;
            }
            let summary = mask_video(&a.video, &a.landmarks, &resolve(root, &a.out), &cfg)?;
            report_tool("mask-apply", summary.statuses.len(), summary.warnings(), &summary.out_dir);
        }
        Command::CropBody(a) => {
            if a.expansion.is_nan() || a.expansion < 0.0 {
                return Err(config_err(format!("--expansion must be non-negative, got {}", a.expansion)));
            }
            let geometry = GeometryConfig { body_expansion: a.expansion, ..GeometryConfig::default() };
            let summary = crop_body_video(&a.video, &a.landmarks, &resolve(root, &a.out), &geometry, a.keep_face)?;
            report_tool("crop-body", summary.statuses.len(), summary.warnings(), &summary.out_dir);
        }
        Command::Train(a) => {
            let cfg = a.run.build(root)?;
            let report = run_experiment(&cfg)?;
            for w in &report.warnings {
                warn!("{w}");
            }
            if let RunStatus::Aborted { error } = &report.status {
                anyhow::bail!("run aborted: {error}");
            }
            println!(
                "{}: best epoch {:?}, {} ROC AUC {}, report {}",
                report.name,
                report.best_epoch,
                cfg.eval_split,
                report.test_unbalanced().map_or("n/a".into(), |v| format!("{v:.4}")),
                cfg.output_dir.join(maskemo_core::harness::REPORT_FILE).display()
            );
        }
        Command::Eval(a) => {
            let (cfg, evaluation) = evaluate_checkpoint(&a.checkpoint, &a.manifest, a.split, a.mask)?;
            let out = resolve(root, &a.out);
            let report = serde_json::json!({
                "checkpoint": a.checkpoint,
                "manifest": a.manifest,
                "split": a.split,
                "modality": cfg.modality,
                "mask": cfg.mask,
                "unbalanced": evaluation.combined.unbalanced,
                "balanced": evaluation.combined.balanced,
                "per_emotion": evaluation.combined.per_emotion,
                "streams": evaluation.streams,
                "records": evaluation.combined.records,
                "skipped": evaluation.combined.skipped,
            });
            write_json(&out.join("eval.json"), report)?;
            if let Some(per) = &evaluation.combined.per_emotion {
                std::fs::write(out.join("per_emotion.csv"), per.to_csv())?;
                std::fs::write(out.join("per_emotion.svg"), maskemo_core::harness::report::per_emotion_svg(per, &format!("{} split ROC AUC", a.split)))?;
                for w in &per.warnings {
                    warn!("{w}");
                }
            }
            println!("{} ROC AUC {}", a.split, evaluation.combined.unbalanced.map_or("n/a".into(), |v| format!("{v:.4}")));
        }
        Command::Explain(a) => {
            let out = resolve(root, &a.out);
            let snippets = explain_video(&a.checkpoint, &a.video, a.landmarks.as_deref(), a.label, a.stream.as_deref(), &out)?;
            println!("{} overlays for {} in {}", snippets.len(), a.label, out.display());
        }
        Command::StudyMaskEffect(a) => {
            let study = StudyConfig {
                base: a.run.build(root)?,
                segments: a.grid_segments,
                modalities: a.modalities,
                apply_mask: !a.no_mask,
                focus_label: a.focus_label,
            };
            let table = mask_effect_study(&study)?;
            print!("{}", table.to_markdown());
        }
        Command::Bench(a) => {
            let cfg = if a.grid_segments.is_empty() { RunConfig::default() } else { a.run.build(root)? };
            let table = bench(&cfg, &a.grid_segments, a.bench_epochs)?;
            if !table.rows.is_empty() {
                write_json(&cfg.output_dir.join("bench.json"), serde_json::to_value(&table)?)?;
                std::fs::write(cfg.output_dir.join("bench.md"), table.to_markdown())?;
            }
            print!("{}", table.to_markdown());
        }
    }
    Ok(())
}

fn report_tool(tool: &str, frames: usize, warnings: usize, out: &Path) {
    info!("{tool}: {frames} frames written to {}", out.display());
    if warnings > 0 {
        warn!("{tool}: {warnings} of {frames} frames reused or lacked geometry; see status.log");
    }
    println!("{frames} frames, {warnings} warnings -> {}", out.display());
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| c.is::<ConfigError>() || c.downcast_ref::<maskemo_core::Error>().is_some_and(|e| e.is_config()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 1 } else { 2 })
        }
    }
}
