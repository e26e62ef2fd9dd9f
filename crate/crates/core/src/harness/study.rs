//! Default-versus-masked comparison grid over segment counts and modalities.

use std::fmt::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::{Modality, RunConfig};
use super::experiment::{run_experiment, ExperimentReport};
use crate::error::{Error, Result};
use crate::labels::{Emotion, NUM_LABELS};
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub base: RunConfig,
    pub segments: Vec<usize>,
    pub modalities: Vec<Modality>,
    /// When false both columns run unmasked, which must give zero deltas.
    pub apply_mask: bool,
    /// Label whose per-label AUC gets its own columns.
    pub focus_label: Option<Emotion>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig { base: RunConfig::default(), segments: vec![1, 3, 5, 10], modalities: vec![Modality::Face, Modality::FullBody], apply_mask: true, focus_label: None }
    }
}

/// Raw metrics of one run of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub unbalanced: Option<f64>,
    pub per_label: Vec<Option<f64>>,
    pub report_hash: String,
    pub output_dir: PathBuf,
}

impl CellRun {
    fn from_report(r: &ExperimentReport) -> Self {
        let per_label = (0..NUM_LABELS).map(|l| r.test.as_ref().and_then(|t| t.label_auc(l))).collect();
        CellRun { unbalanced: r.test_unbalanced(), per_label, report_hash: r.report_hash.clone(), output_dir: r.config.output_dir.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub segments: usize,
    pub modality: Modality,
    pub default: CellRun,
    pub mask: CellRun,
}

/// Percent-point difference `100 * (mask - default)`.
pub fn delta(default: Option<f64>, mask: Option<f64>) -> Option<f64> {
    Some(100.0 * (mask? - default?))
}

/// Signed percent-point string such as `-3.6%`; missing values print as `n/a`.
pub fn format_delta(d: Option<f64>) -> String {
    match d {
        Some(0.0) => "0.0%".into(),
        Some(d) => format!("{d:+.1}%"),
        None => "n/a".into(),
    }
}

impl StudyCell {
    pub fn delta(&self) -> Option<f64> {
        delta(self.default.unbalanced, self.mask.unbalanced)
    }

    pub fn label_delta(&self, label: Emotion) -> Option<f64> {
        delta(self.default.per_label[label.index()], self.mask.per_label[label.index()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub cells: Vec<StudyCell>,
    pub focus_label: Option<Emotion>,
}

fn fmt_auc(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into())
}

impl StudyTable {
    pub fn cell(&self, segments: usize, modality: Modality) -> Option<&StudyCell> {
        self.cells.iter().find(|c| c.segments == segments && c.modality == modality)
    }

    /// Every value is recomputed from the stored cell metrics.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segments,modality,default_auc,mask_auc,delta_pp");
        if let Some(l) = self.focus_label {
            write!(out, ",default_{l},mask_{l},delta_{l}_pp").unwrap();
        }
        out.push('\n');
        let num = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for c in &self.cells {
            write!(out, "{},{},{},{},{}", c.segments, c.modality, num(c.default.unbalanced), num(c.mask.unbalanced), num(c.delta())).unwrap();
            if let Some(l) = self.focus_label {
                write!(out, ",{},{},{}", num(c.default.per_label[l.index()]), num(c.mask.per_label[l.index()]), num(c.label_delta(l))).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Markdown table with one row per segment count and a default / mask / delta triple per modality.
    pub fn to_markdown(&self) -> String {
        let mut segments: Vec<usize> = self.cells.iter().map(|c| c.segments).collect();
        segments.dedup();
        let mut modalities: Vec<Modality> = Vec::new();
        for c in &self.cells {
            if !modalities.contains(&c.modality) {
                modalities.push(c.modality);
            }
        }
        let mut out = String::from("| K |");
        for m in &modalities {
            write!(out, " {m} default | {m} mask | {m} delta |").unwrap();
        }
        out.push_str("\n|---|");
        out.push_str(&"---|---|---|".repeat(modalities.len()));
        out.push('\n');
        for k in segments {
            write!(out, "| {k} |").unwrap();
            for &m in &modalities {
                match self.cell(k, m) {
                    Some(c) => write!(out, " {} | {} | {} |", fmt_auc(c.default.unbalanced), fmt_auc(c.mask.unbalanced), format_delta(c.delta())).unwrap(),
                    None => out.push_str(" | | |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every (segments, modality) cell with and without the synthetic mask.
///
/// Runs write to `<base output>/k<K>_<modality>_<default|mask>`; the table is
/// written as `study.json`, `study.csv` and `study.md` in the base output directory.
pub fn mask_effect_study(study: &StudyConfig) -> Result<StudyTable> {
    study.base.validate()?;
    if study.segments.contains(&0) {
        return Err(Error::Config("segment counts must be at least 1".into()));
    }
    let mut cells = Vec::new();
    for &k in &study.segments {
        for &m in &study.modalities {
            let run = |masked: bool| -> Result<CellRun> {
                let tag = if masked { "mask" } else { "default" };
                let cfg = RunConfig {
                    name: format!("{}_k{k}_{m}_{tag}", study.base.name),
                    segments: k,
                    modality: m,
                    mask: masked && study.apply_mask,
                    output_dir: study.base.output_dir.join(format!("k{k}_{m}_{tag}")),
                    ..study.base.clone()
                };
                log::info!("study cell K={k} {m} {tag}");
                Ok(CellRun::from_report(&run_experiment(&cfg)?))
            };
            cells.push(StudyCell { segments: k, modality: m, default: run(false)?, mask: run(true)? });
        }
    }
    let table = StudyTable { cells, focus_label: study.focus_label };
    let dir = &study.base.output_dir;
    util::write_file(&dir.join("study.json"), serde_json::to_string_pretty(&table)?.as_bytes())?;
    util::write_file(&dir.join("study.csv"), table.to_csv().as_bytes())?;
    util::write_file(&dir.join("study.md"), table.to_markdown().as_bytes())?;
    Ok(table)
}
