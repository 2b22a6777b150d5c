//! File names inside a campaign output directory.

pub const RECORDS_FILE: &str = "records.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CORRELATE_CSV: &str = "correlate.csv";
pub const CORRELATE_JSON: &str = "correlate.json";
pub const OOD_JSON: &str = "ood.json";
pub const OOD_SCORES_CSV: &str = "ood_scores.csv";
pub const HF_TRANSFER_CSV: &str = "hf_transfer.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const TRAJECTORY_SUMMARY_CSV: &str = "trajectory_summary.csv";
pub const TRAJECTORY_PAIRED_CSV: &str = "trajectory_paired.csv";
pub const TRAJECTORY_PAIRED_JSON: &str = "trajectory_paired.json";
