//! Experiment runs: configuration, training loop, reports, studies and tools.

pub mod bench;
pub mod config;
pub mod experiment;
pub mod report;
pub mod study;
pub mod tools;

pub use bench::{bench, BenchRow, BenchTable, HardwareInfo};
pub use config::{stream_name, Modality, RunConfig};
pub use experiment::{
    channel_statistics, defined_labels, emit_report, evaluate_checkpoint, load_report, prepare_data, report_files, run_experiment, ClipMeta,
    EpochRecord, EvalSummary, Evaluation, ExperimentReport, PreparedData, RunStatus, Trainer, CHECKPOINT_FILE, REPORT_FILE,
};
pub use study::{format_delta, mask_effect_study, CellRun, StudyCell, StudyConfig, StudyTable};
pub use tools::{crop_body_video, explain_video, mask_video, ExplainedSnippet, ToolSummary};
