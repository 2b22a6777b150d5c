use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    csv_num, ensure_dir, write_atomic, write_json, CampaignError, ConditionSource, ErrorLine, RunConfig,
    TRAJECTORIES_FILE, TRAJECTORY_PAIRED_CSV, TRAJECTORY_PAIRED_JSON, TRAJECTORY_SUMMARY_CSV,
};
use crate::trajectory::{build_path, endpoint_pair, induce_trajectory, write_summary_csv, PairedComparison, TrajectoryRecord};

/// Metrics compared between conditions.
pub const PAIRED_METRICS: [&str; 6] = ["length", "tortuosity", "excess", "q90", "q95", "max"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum TrajectoryLine {
    Record(TrajectoryRecord),
    Error(ErrorLine),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub records: usize,
    pub errors: usize,
    pub comparisons: Vec<PairedComparison>,
}

/// `trajectory` subcommand. Every seed names one endpoint pair shared by all
/// conditions; each condition acts as the sampler. Writes the records, a
/// per-record summary CSV and, for every non-reference condition, paired
/// `frac` and Monte Carlo ratio statistics against the reference.
pub fn cmd_trajectory(config: &RunConfig) -> Result<TrajectoryReport, CampaignError> {
    config.validate()?;
    let reference = &config.stats.reference;
    let Some(ref_index) = config.conditions.iter().position(|c| &c.name == reference) else {
        return Err(CampaignError::Config(format!("reference condition {reference:?} is not configured")));
    };
    ensure_dir(&config.out_dir)?;
    let sources: Vec<ConditionSource> = config.conditions.iter().map(ConditionSource::resolve).collect::<Result<_, _>>()?;
    let seeds = config.seed_list();
    let mut dim = None;
    for (s, c) in sources.iter().zip(&config.conditions) {
        let d = s.generator(seeds[0])?.descriptor().latent_dim;
        if *dim.get_or_insert(d) != d {
            return Err(CampaignError::Config(format!(
                "condition {} has latent dimension {d}; all trajectory conditions must share one",
                c.name
            )));
        }
    }
    let dim = dim.expect("at least one condition");
    let t = &config.trajectory;

    let cells: Vec<(u64, usize)> = seeds.iter().flat_map(|&s| (0..sources.len()).map(move |c| (s, c))).collect();
    let run = |&(pair, c): &(u64, usize)| -> TrajectoryLine {
        let name = &config.conditions[c].name;
        let result = (|| {
            let (a, b) = endpoint_pair(config.seed, pair, dim).map_err(|e| e.to_string())?;
            let path = build_path(&a, &b, t.steps).map_err(|e| e.to_string())?;
            let g = sources[c].generator(pair).map_err(|e| e.to_string())?;
            induce_trajectory(g.as_ref(), &path, name, pair, t.tortuosity_eps).map_err(|e| e.to_string())
        })();
        match result {
            Ok(r) => TrajectoryLine::Record(r),
            Err(error) => TrajectoryLine::Error(ErrorLine { seed: pair, condition: name.clone(), error }),
        }
    };
    let lines: Vec<TrajectoryLine> = config.thread_pool()?.install(|| cells.par_iter().map(run).collect());

    let mut jsonl = String::new();
    for line in &lines {
        jsonl.push_str(&serde_json::to_string(line).expect("records serialize"));
        jsonl.push('\n');
    }
    write_atomic(&config.out_dir.join(TRAJECTORIES_FILE), jsonl.as_bytes())?;
    let records: Vec<&TrajectoryRecord> = lines
        .iter()
        .filter_map(|l| match l {
            TrajectoryLine::Record(r) => Some(r),
            TrajectoryLine::Error(_) => None,
        })
        .collect();
    let mut csv = Vec::new();
    write_summary_csv(records.iter().copied(), &mut csv).map_err(super::io_err(&config.out_dir))?;
    write_atomic(&config.out_dir.join(TRAJECTORY_SUMMARY_CSV), &csv)?;

    let by_cell: BTreeMap<(u64, &str), &TrajectoryRecord> =
        records.iter().map(|r| ((r.pair, r.condition.as_str()), *r)).collect();
    let mut comparisons = Vec::new();
    for (c, cond) in config.conditions.iter().enumerate() {
        if c == ref_index {
            continue;
        }
        let paired: Vec<(&TrajectoryRecord, &TrajectoryRecord)> = seeds
            .iter()
            .filter_map(|&s| Some((*by_cell.get(&(s, reference.as_str()))?, *by_cell.get(&(s, cond.name.as_str()))?)))
            .collect();
        if paired.is_empty() {
            return Err(CampaignError::Data(format!("no complete pairs between {reference} and {}", cond.name)));
        }
        for metric in PAIRED_METRICS {
            let a = paired.iter().map(|(r, _)| r.metric(metric).expect("known metric")).collect();
            let b = paired.iter().map(|(_, r)| r.metric(metric).expect("known metric")).collect();
            let cmp = PairedComparison::new(metric, reference.clone(), cond.name.clone(), a, b)
                .and_then(|p| p.with_monte_carlo(t.n_mc, t.fraction, config.seed))
                .map_err(|e| CampaignError::Data(e.to_string()))?;
            comparisons.push(cmp);
        }
    }

    let mut paired_csv = String::from(
        "metric,condition_a,condition_b,pairs,frac,ratio,mc_ratio_mean,mc_ratio_std,mc_diff_mean,mc_diff_std,mc_resamples,mc_sample_size,mc_skipped\n",
    );
    for p in &comparisons {
        let mc = p.monte_carlo.as_ref().expect("monte carlo attached");
        let _ = writeln!(
            paired_csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.metric,
            p.condition_a,
            p.condition_b,
            p.values_a.len(),
            csv_num(Some(p.frac)),
            csv_num(Some(p.ratio)),
            csv_num(Some(mc.ratio_mean)),
            csv_num(Some(mc.ratio_std)),
            csv_num(Some(mc.diff_mean)),
            csv_num(Some(mc.diff_std)),
            mc.resamples,
            mc.sample_size,
            mc.skipped
        );
    }
    write_atomic(&config.out_dir.join(TRAJECTORY_PAIRED_CSV), paired_csv.as_bytes())?;
    let report = TrajectoryReport { records: records.len(), errors: lines.len() - records.len(), comparisons };
    write_json(&config.out_dir.join(TRAJECTORY_PAIRED_JSON), &report)?;
    Ok(report)
}
