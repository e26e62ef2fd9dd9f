//! Wall-clock time per epoch as a function of the segment count.

use std::fmt::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::experiment::{prepare_data, Trainer};
use crate::dataset::Split;
use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareInfo {
    pub cpu: String,
    pub logical_cpus: usize,
    pub worker_threads: usize,
    pub os: String,
    pub arch: String,
}

impl HardwareInfo {
    pub fn detect() -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| s.lines().find(|l| l.starts_with("model name")).and_then(|l| l.split(':').nth(1)).map(|m| m.trim().to_string()))
            .unwrap_or_else(|| "unknown".into());
        HardwareInfo {
            cpu,
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            worker_threads: rayon::current_num_threads(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

impl std::fmt::Display for HardwareInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} logical CPUs, {} worker threads, {}/{})", self.cpu, self.logical_cpus, self.worker_threads, self.os, self.arch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub segments: usize,
    pub train_seconds: Vec<f64>,
    pub val_seconds: Vec<f64>,
    pub train_median: f64,
    pub val_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub hardware: HardwareInfo,
    pub epochs: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("Hardware: {}\n\n| K | train s/epoch | val s/epoch |\n|---|---|---|\n", self.hardware);
        for r in &self.rows {
            writeln!(out, "| {} | {:.3} | {:.3} |", r.segments, r.train_median, r.val_median).unwrap();
        }
        out
    }

    /// True when median training time grows strictly with the segment count.
    pub fn train_time_increasing(&self) -> bool {
        let mut rows: Vec<&BenchRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.segments);
        rows.windows(2).all(|w| w[1].train_median > w[0].train_median)
    }
}

pub const MIN_BENCH_EPOCHS: usize = 3;

/// Times `epochs` training epochs and validation passes for every segment count.
///
/// Data is prepared once and shared by every row; an empty grid returns an empty table.
pub fn bench(base: &RunConfig, segments: &[usize], epochs: usize) -> Result<BenchTable> {
    let hardware = HardwareInfo::detect();
    if segments.is_empty() {
        return Ok(BenchTable { hardware, epochs, rows: Vec::new() });
    }
    if epochs < MIN_BENCH_EPOCHS {
        return Err(Error::Config(format!("bench needs at least {MIN_BENCH_EPOCHS} epochs, got {epochs}")));
    }
    base.validate()?;
    let data = prepare_data(base)?;
    let eval_split = if data.split_indices(Split::Val).is_empty() { Split::Train } else { Split::Val };
    let mut rows = Vec::with_capacity(segments.len());
    for &k in segments {
        let cfg = RunConfig { segments: k, ..base.clone() };
        cfg.validate()?;
        let mut trainer = Trainer::new(&cfg, &data)?;
        let mut train_seconds = Vec::with_capacity(epochs);
        let mut val_seconds = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            let t = Instant::now();
            trainer.train_epoch(epoch)?;
            train_seconds.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            trainer.evaluate(eval_split, epoch)?;
            val_seconds.push(t.elapsed().as_secs_f64());
        }
        log::info!("bench K={k}: {:?}", train_seconds);
        rows.push(BenchRow { segments: k, train_median: util::median(&train_seconds), val_median: util::median(&val_seconds), train_seconds, val_seconds });
    }
    Ok(BenchTable { hardware, epochs, rows })
}
