use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use image::RgbImage;
use ndarray::{Array4, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{stream_name, RunConfig};
use super::report;
use crate::dataset::{load_clip, load_manifest, prepare_stream, sample_clip, GeometryConfig, SamplerConfig, SamplingMode, Split, StreamKind};
use crate::error::{Error, Result};
use crate::fusion::fuse_available;
use crate::labels::{LabelVector, NUM_LABELS};
use crate::metrics::{per_emotion_report, roc_auc_balanced, roc_auc_unbalanced, select_best_epoch, EvalRecord, PerEmotionReport};
use crate::model::{
    consensus, image_to_tensor, load_checkpoint, save_checkpoint, train_step, Backbone, Checkpoint, CheckpointHeader, ClipInput, EmotionScores,
    Normalization, Sgd, StreamHeader,
};
use crate::util::{self, stream_rng};

const SHUFFLE_STREAM: u64 = 0x5eed;
const EVAL_STREAM: u64 = 0xe7a1;

pub const REPORT_FILE: &str = "report.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Debug, Clone)]
pub struct ClipMeta {
    pub id: String,
    pub labels: LabelVector,
    pub split: Split,
    pub frame_count: usize,
}

/// Clips of a manifest converted to normalized tensors, one per clip and stream.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub clips: Vec<ClipMeta>,
    pub streams: Vec<StreamKind>,
    /// `tensors[s][c]` is `[frames, 3, S, S]`, or `None` when clip `c` lacks stream `s`.
    pub tensors: Vec<Vec<Option<Array4<f64>>>>,
    pub normalization: Normalization,
    pub warnings: Vec<String>,
}

impl PreparedData {
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.clips.iter().enumerate().filter(|(_, c)| c.split == split).map(|(i, _)| i).collect()
    }
}

/// Per-channel mean and standard deviation of `[0, 1]` pixel values.
pub fn channel_statistics<'a>(frames: impl IntoIterator<Item = &'a RgbImage>) -> Normalization {
    let mut sum = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    let mut n = 0.0;
    for f in frames {
        for p in f.pixels() {
            for c in 0..3 {
                let v = p.0[c] as f64 / 255.0;
                sum[c] += v;
                sq[c] += v * v;
            }
            n += 1.0;
        }
    }
    if n == 0.0 {
        return Normalization::default();
    }
    let mean = sum.map(|s| s / n);
    let std = std::array::from_fn(|c| (sq[c] / n - mean[c] * mean[c]).max(0.0).sqrt().max(1e-3));
    Normalization { mean, std }
}

/// Clip metadata, per-stream frames with availability, and warnings.
type LoadedClip = (ClipMeta, Vec<(Vec<RgbImage>, bool)>, Vec<String>);

/// Loads every clip of the manifest, crops the streams the modality needs and builds tensors.
pub fn prepare_data(cfg: &RunConfig) -> Result<PreparedData> {
    let manifest = load_manifest(&cfg.manifest)?;
    let streams = cfg.modality.streams();
    let geometry = GeometryConfig { mask: cfg.mask, ..cfg.geometry.clone() };
    let loaded: Vec<Result<LoadedClip>> = (0..manifest.entries.len())
        .into_par_iter()
        .map(|i| {
            let clip = load_clip(&manifest, i)?;
            let mut warnings = Vec::new();
            let mut per_stream = Vec::with_capacity(streams.len());
            for &kind in &streams {
                let prepared = prepare_stream(&clip, kind, &geometry, cfg.input_size);
                let issues = prepared.statuses.iter().filter(|s| s.is_warning()).count();
                if !prepared.available {
                    warnings.push(format!("clip {}: no {} crop in any frame; stream marked absent", clip.id, stream_name(kind)));
                } else if issues > 0 {
                    warnings.push(format!("clip {}: {issues} of {} frames reused or lacked {} geometry", clip.id, clip.frames.len(), stream_name(kind)));
                }
                per_stream.push((prepared.frames, prepared.available));
            }
            let meta = ClipMeta { id: clip.id.clone(), labels: clip.labels, split: clip.split, frame_count: clip.frames.len() };
            Ok((meta, per_stream, warnings))
        })
        .collect();
    let mut clips = Vec::new();
    let mut frames = Vec::new();
    let mut warnings = Vec::new();
    for item in loaded {
        let (meta, per_stream, w) = item?;
        clips.push(meta);
        frames.push(per_stream);
        warnings.extend(w);
    }
    let normalization = match cfg.normalization {
        Some(n) => n,
        None => channel_statistics(
            clips.iter().zip(&frames).filter(|(c, _)| c.split == Split::Train).flat_map(|(_, s)| s.iter().filter(|(_, ok)| *ok).flat_map(|(f, _)| f.iter())),
        ),
    };
    let mut tensors = vec![Vec::with_capacity(clips.len()); streams.len()];
    for per_stream in &frames {
        for (s, (f, ok)) in per_stream.iter().enumerate() {
            tensors[s].push(if *ok { Some(image_to_tensor(f, &normalization)?) } else { None });
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(PreparedData { clips, streams, tensors, normalization, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// Pooled AUC on the selection split; `None` when undefined.
    pub val_auc: Option<f64>,
    pub train_auc: Option<f64>,
    pub train_seconds: f64,
    pub val_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub split: Split,
    pub unbalanced: Option<f64>,
    pub balanced: Option<f64>,
    pub per_emotion: Option<PerEmotionReport>,
    pub records: Vec<EvalRecord>,
    /// Clips left out because none of their streams was available.
    pub skipped: Vec<String>,
}

impl EvalSummary {
    pub fn from_records(split: Split, records: Vec<EvalRecord>, skipped: Vec<String>) -> Self {
        let (unbalanced, balanced, per_emotion) = if records.is_empty() {
            (None, None, None)
        } else {
            (roc_auc_unbalanced(&records).ok(), roc_auc_balanced(&records).ok(), per_emotion_report(&records).ok())
        };
        EvalSummary { split, unbalanced, balanced, per_emotion, records, skipped }
    }

    pub fn label_auc(&self, label: usize) -> Option<f64> {
        self.per_emotion.as_ref().and_then(|p| p.entries.get(label)).and_then(|e| e.auc)
    }
}

/// Fused (or single-stream) evaluation plus each stream on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub combined: EvalSummary,
    pub streams: BTreeMap<String, EvalSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Aborted { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub status: RunStatus,
    pub normalization: Normalization,
    pub selection_split: Split,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were evaluated; `None` for an untrained model.
    pub best_epoch: Option<usize>,
    pub test: Option<EvalSummary>,
    pub train: Option<EvalSummary>,
    /// Single-stream results of a fusion run, keyed by stream name.
    pub stream_tests: BTreeMap<String, EvalSummary>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    /// SHA-256 over every deterministic field (timings and artifact paths excluded).
    pub report_hash: String,
}

impl ExperimentReport {
    pub fn compute_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.report_hash.clear();
        canonical.artifacts.clear();
        canonical.config.output_dir = PathBuf::new();
        for h in &mut canonical.history {
            h.train_seconds = 0.0;
            h.val_seconds = 0.0;
        }
        util::sha256_hex(serde_json::to_string(&canonical).expect("report serializes").as_bytes())
    }

    pub fn test_unbalanced(&self) -> Option<f64> {
        self.test.as_ref().and_then(|t| t.unbalanced)
    }

    pub fn max_train_auc(&self) -> Option<f64> {
        self.history.iter().filter_map(|h| h.train_auc).fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }
}

/// Owns one network and optimizer per stream of a modality.
pub struct Trainer<'a> {
    cfg: &'a RunConfig,
    data: &'a PreparedData,
    pub models: Vec<Backbone>,
    optimizers: Vec<Sgd>,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a RunConfig, data: &'a PreparedData) -> Result<Self> {
        let models = (0..data.streams.len())
            .map(|s| Backbone::new(cfg.architecture.clone(), cfg.shift(), cfg.input_size, util::mix64(cfg.seed ^ (s as u64 + 1))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self::with_models(cfg, data, models))
    }

    pub fn with_models(cfg: &'a RunConfig, data: &'a PreparedData, models: Vec<Backbone>) -> Self {
        let optimizers = models.iter().map(|m| Sgd::from_config(&cfg.optimizer, m.num_params())).collect();
        Trainer { cfg, data, models, optimizers }
    }

    fn sampler(&self, mode: SamplingMode) -> SamplerConfig {
        SamplerConfig { segments: self.cfg.segments, snippet_frames: self.cfg.snippet_frames, mode, seed: self.cfg.seed }
    }

    fn snippets(&self, tensor: &Array4<f64>, clip: usize, mode: SamplingMode, key: u64) -> Vec<Array4<f64>> {
        let mut rng = stream_rng(&[self.cfg.seed, key, clip as u64]);
        sample_clip(self.data.clips[clip].frame_count, &self.sampler(mode), &mut rng)
            .iter()
            .map(|s| tensor.select(Axis(0), &s.frame_indices))
            .collect()
    }

    /// One pass over the training split; returns the mean summed stream loss per batch.
    pub fn train_epoch(&mut self, epoch: usize) -> Result<f64> {
        let lr = self.cfg.optimizer.lr_at(epoch);
        let mut order = self.data.split_indices(Split::Train);
        order.shuffle(&mut stream_rng(&[self.cfg.seed, SHUFFLE_STREAM, epoch as u64]));
        let mut total = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(self.cfg.optimizer.batch_size) {
            let mut batch_loss = 0.0;
            for s in 0..self.models.len() {
                let inputs: Vec<ClipInput> = batch
                    .iter()
                    .filter_map(|&c| {
                        self.data.tensors[s][c].as_ref().map(|t| ClipInput {
                            id: self.data.clips[c].id.clone(),
                            snippets: self.snippets(t, c, SamplingMode::TrainRandom, epoch as u64),
                            labels: self.data.clips[c].labels,
                        })
                    })
                    .collect();
                if inputs.is_empty() {
                    continue;
                }
                let outcome = train_step(&mut self.models[s], &mut self.optimizers[s], &inputs, lr)
                    .map_err(|e| Error::from(e).context(format!("epoch {epoch}, {} stream", stream_name(self.data.streams[s]))))?;
                batch_loss += outcome.loss;
            }
            total += batch_loss;
            batches += 1;
        }
        Ok(if batches == 0 { 0.0 } else { total / batches as f64 })
    }

    fn video_logits(&self, s: usize, clip: usize) -> Result<Option<EmotionScores>> {
        let Some(tensor) = &self.data.tensors[s][clip] else { return Ok(None) };
        let scores = self
            .snippets(tensor, clip, SamplingMode::EvalCenter, EVAL_STREAM)
            .iter()
            .map(|x| self.models[s].snippet_forward(x))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Some(consensus(&scores)?))
    }

    /// Center-sampled evaluation of every clip in `split`.
    pub fn evaluate(&self, split: Split, epoch: usize) -> Result<Evaluation> {
        let clips = self.data.split_indices(split);
        let per_clip: Vec<Result<Vec<Option<EmotionScores>>>> =
            clips.par_iter().map(|&c| (0..self.models.len()).map(|s| Ok(self.video_logits(s, c)?.map(|l| l.to_probabilities()))).collect()).collect();
        let mut combined = Vec::new();
        let mut skipped = Vec::new();
        let mut streams: Vec<(Vec<EvalRecord>, Vec<String>)> = vec![(Vec::new(), Vec::new()); self.models.len()];
        for (&c, result) in clips.iter().zip(per_clip) {
            let probs = result?;
            let meta = &self.data.clips[c];
            let record = |p: EmotionScores| EvalRecord { clip_id: meta.id.clone(), epoch, probabilities: p.values, labels: meta.labels };
            let fused = if probs.len() == 2 { fuse_available(probs[0].as_ref(), probs[1].as_ref(), &self.cfg.fusion)? } else { probs[0] };
            match fused {
                Some(p) => combined.push(record(p)),
                None => skipped.push(meta.id.clone()),
            }
            if probs.len() > 1 {
                for (s, p) in probs.iter().enumerate() {
                    match p {
                        Some(p) => streams[s].0.push(record(*p)),
                        None => streams[s].1.push(meta.id.clone()),
                    }
                }
            }
        }
        let streams = if self.models.len() > 1 {
            streams.into_iter().enumerate().map(|(s, (r, k))| (stream_name(self.data.streams[s]).to_string(), EvalSummary::from_records(split, r, k))).collect()
        } else {
            BTreeMap::new()
        };
        Ok(Evaluation { combined: EvalSummary::from_records(split, combined, skipped), streams })
    }

    pub fn checkpoint(&self, epoch: usize) -> Checkpoint {
        let header = CheckpointHeader {
            architecture: self.cfg.architecture.clone(),
            shift: self.cfg.shift(),
            input_size: self.cfg.input_size,
            normalization: self.data.normalization,
            modality: self.cfg.modality.name().to_string(),
            segments: self.cfg.segments,
            snippet_frames: self.cfg.snippet_frames,
            epoch,
            seed: self.cfg.seed,
            streams: self.models.iter().zip(&self.data.streams).map(|(m, &k)| StreamHeader { name: stream_name(k).into(), len: m.num_params() }).collect(),
            run_config: serde_json::to_value(self.cfg).expect("config serializes"),
        };
        Checkpoint { header, params: self.models.iter().map(|m| m.params.clone()).collect() }
    }
}

/// Writes the report, its CSV tables and plots into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, bytes) in report_files(report) {
        util::write_file(&dir.join(&name), bytes.as_bytes())?;
        written.push(PathBuf::from(name));
    }
    Ok(written)
}

/// Derived files of a report, computed only from stored fields.
pub fn report_files(report: &ExperimentReport) -> Vec<(String, String)> {
    let mut files = Vec::new();
    let epochs: Vec<String> = report.history.iter().map(|h| h.epoch.to_string()).collect();
    let rows: Vec<Vec<Option<f64>>> =
        report.history.iter().map(|h| vec![Some(h.lr), Some(h.train_loss), h.val_auc, h.train_auc, Some(h.train_seconds), Some(h.val_seconds)]).collect();
    files.push(("history.csv".to_string(), report::csv(&["epoch", "lr", "train_loss", "val_auc", "train_auc", "train_seconds", "val_seconds"], &rows, &epochs)));
    files.push((
        "history.svg".to_string(),
        report::series_svg(
            &format!("{}: training history", report.name),
            &[
                ("train loss", report.history.iter().map(|h| Some(h.train_loss)).collect()),
                ("val ROC AUC", report.history.iter().map(|h| h.val_auc).collect()),
                ("train ROC AUC", report.history.iter().map(|h| h.train_auc).collect()),
            ],
        ),
    ));
    if let Some(per) = report.test.as_ref().and_then(|t| t.per_emotion.as_ref()) {
        files.push(("per_emotion.csv".to_string(), per.to_csv()));
        files.push(("per_emotion.svg".to_string(), report::per_emotion_svg(per, &format!("{}: per-emotion ROC AUC", report.name))));
    }
    files.push((REPORT_FILE.to_string(), serde_json::to_string_pretty(report).expect("report serializes")));
    files
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(&util::read_to_string(path)?)?)
}

struct Outcome {
    history: Vec<EpochRecord>,
    best_epoch: Option<usize>,
    evaluation: Option<(Evaluation, EvalSummary)>,
    checkpoint: Option<Checkpoint>,
}

fn train_and_select(cfg: &RunConfig, data: &PreparedData, selection: Split, history: &mut Vec<EpochRecord>) -> Result<Outcome> {
    let mut trainer = Trainer::new(cfg, data)?;
    let mut best: Option<(f64, usize, Vec<Vec<f64>>)> = None;
    for epoch in 0..cfg.optimizer.epochs {
        let t0 = Instant::now();
        let train_loss = trainer.train_epoch(epoch)?;
        let train_seconds = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let val_auc = trainer.evaluate(selection, epoch)?.combined.unbalanced;
        let val_seconds = t1.elapsed().as_secs_f64();
        let train_auc = if cfg.track_train_auc { trainer.evaluate(Split::Train, epoch)?.combined.unbalanced } else { None };
        log::info!("{}: epoch {epoch} loss {train_loss:.4} val AUC {val_auc:?} ({train_seconds:.2}s)", cfg.name);
        history.push(EpochRecord { epoch, lr: cfg.optimizer.lr_at(epoch), train_loss, val_auc, train_auc, train_seconds, val_seconds });
        // keep the earliest epoch with the highest metric
        let metric = val_auc.unwrap_or(f64::NAN);
        if best.as_ref().is_none_or(|(m, _, _)| metric > *m || m.is_nan() && !metric.is_nan()) {
            best = Some((metric, epoch, trainer.models.iter().map(|m| m.params.clone()).collect()));
        }
    }
    let best_epoch = if history.is_empty() {
        None
    } else {
        let metrics: Vec<f64> = history.iter().map(|h| h.val_auc.unwrap_or(f64::NAN)).collect();
        let chosen = select_best_epoch(&metrics)?;
        debug_assert_eq!(Some(chosen), best.as_ref().map(|b| b.1));
        Some(chosen)
    };
    if let Some((_, _, params)) = best {
        for (m, p) in trainer.models.iter_mut().zip(params) {
            m.params = p;
        }
    }
    let epoch = best_epoch.unwrap_or(0);
    let test = trainer.evaluate(cfg.eval_split, epoch)?;
    let train = trainer.evaluate(Split::Train, epoch)?.combined;
    let checkpoint = cfg.save_checkpoint.then(|| trainer.checkpoint(epoch));
    Ok(Outcome { history: std::mem::take(history), best_epoch, evaluation: Some((test, train)), checkpoint })
}

/// Trains, selects the best validation epoch, evaluates it and persists report and checkpoint.
///
/// On failure after data preparation a partial report with status `aborted` is
/// still written to the output directory.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = prepare_data(cfg).map_err(|e| e.context(format!("run '{}': preparing data", cfg.name)))?;
    let selection = if data.split_indices(Split::Val).is_empty() { Split::Train } else { Split::Val };
    let mut report = ExperimentReport {
        name: cfg.name.clone(),
        config_hash: cfg.config_hash(),
        config: cfg.clone(),
        status: RunStatus::Complete,
        normalization: data.normalization,
        selection_split: selection,
        history: Vec::new(),
        best_epoch: None,
        test: None,
        train: None,
        stream_tests: BTreeMap::new(),
        warnings: data.warnings.clone(),
        artifacts: Vec::new(),
        report_hash: String::new(),
    };
    if selection == Split::Train {
        report.warnings.push("no validation clips; epoch selection uses the training split".into());
    }
    let mut history = Vec::new();
    match train_and_select(cfg, &data, selection, &mut history) {
        Ok(outcome) => {
            report.history = outcome.history;
            report.best_epoch = outcome.best_epoch;
            if let Some((test, train)) = outcome.evaluation {
                for (name, summary) in &test.streams {
                    if summary.unbalanced.is_none() && !summary.records.is_empty() {
                        report.warnings.push(format!("{name} stream: ROC AUC undefined on {}", summary.split));
                    }
                }
                report.stream_tests = test.streams;
                if test.combined.unbalanced.is_none() {
                    report.warnings.push(format!("ROC AUC undefined on the {} split", cfg.eval_split));
                }
                if let Some(per) = &test.combined.per_emotion {
                    report.warnings.extend(per.warnings.iter().cloned());
                }
                report.test = Some(test.combined);
                report.train = Some(train);
            }
            if let Some(ckpt) = outcome.checkpoint {
                let path = cfg.output_dir.join(CHECKPOINT_FILE);
                save_checkpoint(&path, &ckpt)?;
                report.artifacts.push(PathBuf::from(CHECKPOINT_FILE));
            }
            report.report_hash = report.compute_hash();
            let mut files = emit_report(&report, &cfg.output_dir)?;
            report.artifacts.append(&mut files);
            // rewrite so the stored report lists its own artifacts
            util::write_file(&cfg.output_dir.join(REPORT_FILE), serde_json::to_string_pretty(&report)?.as_bytes())?;
            Ok(report)
        }
        Err(e) => {
            report.history = history;
            report.status = RunStatus::Aborted { error: e.full_message() };
            report.report_hash = report.compute_hash();
            if let Err(write_err) = emit_report(&report, &cfg.output_dir) {
                log::error!("could not flush partial report: {write_err}");
            }
            Err(e.context(format!("run '{}'", cfg.name)))
        }
    }
}

/// Evaluates a saved checkpoint on one split of a manifest.
pub fn evaluate_checkpoint(checkpoint: &Path, manifest: &Path, split: Split, mask: Option<bool>) -> Result<(RunConfig, Evaluation)> {
    let ckpt = load_checkpoint(checkpoint)?;
    let mut cfg: RunConfig = if ckpt.header.run_config.is_null() {
        RunConfig {
            architecture: ckpt.header.architecture.clone(),
            shift_fraction: ckpt.header.shift.map(|s| s.fraction),
            input_size: ckpt.header.input_size,
            segments: ckpt.header.segments,
            snippet_frames: ckpt.header.snippet_frames,
            modality: ckpt.header.modality.parse().map_err(Error::Config)?,
            seed: ckpt.header.seed,
            ..Default::default()
        }
    } else {
        serde_json::from_value(ckpt.header.run_config.clone())?
    };
    cfg.manifest = manifest.to_path_buf();
    cfg.normalization = Some(ckpt.header.normalization);
    if let Some(m) = mask {
        cfg.mask = m;
    }
    let data = prepare_data(&cfg)?;
    if ckpt.params.len() != data.streams.len() {
        return Err(Error::Config(format!("checkpoint has {} streams, modality {} needs {}", ckpt.params.len(), cfg.modality, data.streams.len())));
    }
    let models = ckpt
        .params
        .iter()
        .map(|p| Backbone::from_params(cfg.architecture.clone(), cfg.shift(), cfg.input_size, p.clone()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let evaluation = Trainer::with_models(&cfg, &data, models).evaluate(split, ckpt.header.epoch)?;
    Ok((cfg, evaluation))
}

/// Number of labels with both classes present in `split`.
pub fn defined_labels(data: &PreparedData, split: Split) -> usize {
    let idx = data.split_indices(split);
    (0..NUM_LABELS)
        .filter(|&l| {
            let pos = idx.iter().filter(|&&c| data.clips[c].labels[l] == 1).count();
            pos > 0 && pos < idx.len()
        })
        .count()
}
