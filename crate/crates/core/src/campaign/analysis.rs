use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    csv_num, ensure_dir, read_records, write_atomic, write_json, CampaignError, RecordSet, RunConfig, CORRELATE_CSV,
    CORRELATE_JSON, HF_TRANSFER_CSV, OOD_JSON, OOD_SCORES_CSV,
};
use crate::geometry::GeometricRecord;
use crate::seeding::{self, stream};
use crate::stats::{self, CorrelationSummary, DetectionResult, Label, StatsError};

fn data_err(e: impl std::fmt::Display) -> CampaignError {
    CampaignError::Data(e.to_string())
}

fn check_metric(name: &str) -> Result<(), CampaignError> {
    if GeometricRecord::METRICS.contains(&name) {
        Ok(())
    } else {
        Err(CampaignError::Data(format!(
            "unknown metric field {name:?}; known fields: {}",
            GeometricRecord::METRICS.join(", ")
        )))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub condition: String,
    pub x: String,
    pub y: String,
    /// Records with both metrics present.
    pub pool: usize,
    pub summary: CorrelationSummary,
    /// Relative change of `rho_mean` against the reference condition.
    pub drop_vs_reference: Option<f64>,
}

/// Subsampled Spearman ρ per condition and metric pair, plus the relative
/// drop of each condition against `config.stats.reference`.
///
/// The subsample size is capped at the pool size.
pub fn correlate_records(set: &RecordSet, config: &RunConfig) -> Result<Vec<CorrelationRow>, CampaignError> {
    let s = &config.stats;
    for [x, y] in &s.pairs {
        check_metric(x)?;
        check_metric(y)?;
    }
    let mut rows = Vec::new();
    for condition in set.conditions() {
        for [x, y] in &s.pairs {
            let (xs, ys): (Vec<f64>, Vec<f64>) = set
                .by_condition(&condition)
                .filter_map(|r| Some((r.metric(x)?, r.metric(y)?)))
                .unzip();
            let n = s.subsample_n.min(xs.len());
            let mut summary = stats::subsampled_correlation(&xs, &ys, n, s.runs, config.seed)
                .map_err(|e| CampaignError::Data(format!("condition {condition}, ({x}, {y}): {e}")))?;
            if summary.runs >= 2 {
                summary = summary.with_ci(s.n_boot, s.ci_level, config.seed).map_err(data_err)?;
            }
            rows.push(CorrelationRow {
                condition: condition.clone(),
                x: x.clone(),
                y: y.clone(),
                pool: xs.len(),
                summary,
                drop_vs_reference: None,
            });
        }
    }
    let reference: BTreeMap<(String, String), f64> = rows
        .iter()
        .filter(|r| r.condition == s.reference)
        .map(|r| ((r.x.clone(), r.y.clone()), r.summary.rho_mean))
        .collect();
    for row in rows.iter_mut().filter(|r| r.condition != s.reference) {
        if let Some(&base) = reference.get(&(row.x.clone(), row.y.clone())) {
            row.drop_vs_reference = stats::correlation_drop(base, row.summary.rho_mean).ok();
        }
    }
    Ok(rows)
}

/// `correlate` subcommand: reads records and writes `correlate.csv` and
/// `correlate.json`.
pub fn cmd_correlate(config: &RunConfig, records: &Path) -> Result<Vec<CorrelationRow>, CampaignError> {
    let set = read_records(records)?;
    let rows = correlate_records(&set, config)?;
    ensure_dir(&config.out_dir)?;
    let mut csv = String::from("condition,x,y,pool,subsample_size,runs,skipped,rho_mean,rho_std,ci_low,ci_high,drop_vs_reference\n");
    for r in &rows {
        let s = &r.summary;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.condition,
            r.x,
            r.y,
            r.pool,
            s.subsample_size,
            s.runs,
            s.skipped,
            csv_num(Some(s.rho_mean)),
            csv_num(Some(s.rho_std)),
            csv_num(s.ci_low),
            csv_num(s.ci_high),
            csv_num(r.drop_vs_reference)
        );
    }
    write_atomic(&config.out_dir.join(CORRELATE_CSV), csv.as_bytes())?;
    write_json(&config.out_dir.join(CORRELATE_JSON), &rows)?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub reference: String,
    pub n_normal: usize,
    pub n_ood: usize,
    /// LC/PHFE scores, OOD as the positive class.
    pub lc_over_phfe: DetectionResult,
    pub auroc_lc: f64,
    /// `None` when every record of a class has a null LS.
    pub auroc_ls: Option<f64>,
    /// Records left out of the LS baseline for a null LS.
    pub ls_excluded: usize,
}

/// Scores every record with LC/PHFE. Records of the reference condition
/// are labelled normal and all others OOD.
pub fn ood_report(set: &RecordSet, reference: &str, floor: f64) -> Result<OodReport, CampaignError> {
    let labels: Vec<Label> = set
        .records
        .iter()
        .map(|r| if r.condition == reference { Label::Normal } else { Label::Ood })
        .collect();
    let n_normal = labels.iter().filter(|l| **l == Label::Normal).count();
    let n_ood = labels.len() - n_normal;
    if n_normal == 0 || n_ood == 0 {
        return Err(CampaignError::Data(format!(
            "detection needs records of reference condition {reference:?} and of at least one other condition"
        )));
    }
    let positive: Vec<bool> = labels.iter().map(|l| *l == Label::Ood).collect();
    let scores: Vec<f64> = set.records.iter().map(|r| stats::ood_score(r.lc, r.phfe, floor)).collect();
    let lc: Vec<f64> = set.records.iter().map(|r| r.lc).collect();
    let (ls, ls_pos): (Vec<f64>, Vec<bool>) =
        set.records.iter().zip(&positive).filter_map(|(r, p)| Some((r.ls?, *p))).unzip();
    let auroc_ls = match stats::auroc(&ls, &ls_pos) {
        Ok(a) => Some(a),
        Err(StatsError::SingleClass) => None,
        Err(e) => return Err(data_err(e)),
    };
    Ok(OodReport {
        reference: reference.to_string(),
        n_normal,
        n_ood,
        lc_over_phfe: DetectionResult::new(scores, labels).map_err(data_err)?,
        auroc_lc: stats::auroc(&lc, &positive).map_err(data_err)?,
        auroc_ls,
        ls_excluded: set.records.len() - ls.len(),
    })
}

/// `ood` subcommand: writes `ood.json` and the score table `ood_scores.csv`.
pub fn cmd_ood(config: &RunConfig, records: &Path) -> Result<OodReport, CampaignError> {
    let set = read_records(records)?;
    let report = ood_report(&set, &config.stats.reference, config.stats.ratio_floor)?;
    ensure_dir(&config.out_dir)?;
    let mut csv = Vec::new();
    report.lc_over_phfe.write_csv(&mut csv).map_err(super::io_err(&config.out_dir))?;
    write_atomic(&config.out_dir.join(OOD_SCORES_CSV), &csv)?;
    write_json(&config.out_dir.join(OOD_JSON), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HfTransferRow {
    pub condition: String,
    pub n: usize,
    pub median_phfe: f64,
    pub median_hfe: f64,
    pub median_top5: f64,
    pub median_top10: f64,
    pub median_top15: f64,
    pub median_top20: f64,
    /// `η = median HFE / max(median PHFE, floor)`.
    pub eta: f64,
    /// `η − η_reference`; `None` on the reference row.
    pub delta_eta: Option<f64>,
    pub delta_ci_low: Option<f64>,
    pub delta_ci_high: Option<f64>,
}

struct Column {
    phfe: Vec<f64>,
    hfe: Vec<f64>,
}

impl Column {
    fn eta(&self, idx: &[usize], floor: f64) -> f64 {
        let med = |v: &[f64]| stats::median(&idx.iter().map(|&i| v[i]).collect::<Vec<_>>()).unwrap_or(f64::NAN);
        stats::transfer_efficiency(med(&self.hfe), med(&self.phfe), floor)
    }
}

/// Per-condition medians and transfer efficiency, with a paired percentile
/// bootstrap CI on `Δη` against the reference. Seeds must pair up exactly.
pub fn hf_transfer_summary(set: &RecordSet, config: &RunConfig) -> Result<Vec<HfTransferRow>, CampaignError> {
    let s = &config.stats;
    let reference = &s.reference;
    let conditions = set.conditions();
    if !conditions.contains(reference) {
        return Err(CampaignError::Data(format!("no records for reference condition {reference:?}")));
    }
    let seeds_of = |c: &str| -> BTreeMap<u64, &GeometricRecord> {
        set.records.iter().filter(|r| r.condition == c).map(|r| (r.seed, r)).collect()
    };
    let ref_seeds = seeds_of(reference);
    let mut orphans = Vec::new();
    for c in conditions.iter().filter(|c| *c != reference) {
        let other = seeds_of(c);
        let a: BTreeSet<u64> = ref_seeds.keys().copied().collect();
        let b: BTreeSet<u64> = other.keys().copied().collect();
        orphans.extend(a.symmetric_difference(&b).map(|seed| format!("{c}/{reference} seed {seed}")));
    }
    if !orphans.is_empty() {
        return Err(CampaignError::Data(format!("unpaired seeds: {}", orphans.join(", "))));
    }
    let seeds: Vec<u64> = ref_seeds.keys().copied().collect();
    let column = |c: &str| {
        let by_seed = seeds_of(c);
        let rows: Vec<&GeometricRecord> = seeds.iter().map(|s| by_seed[s]).collect();
        rows
    };
    let ref_col = {
        let rows = column(reference);
        Column { phfe: rows.iter().map(|r| r.phfe).collect(), hfe: rows.iter().map(|r| r.hfe).collect() }
    };
    let all: Vec<usize> = (0..seeds.len()).collect();
    let mut out = Vec::new();
    for c in &conditions {
        let rows = column(c);
        let med = |f: &dyn Fn(&GeometricRecord) -> f64| {
            stats::median(&rows.iter().map(|r| f(r)).collect::<Vec<_>>()).map_err(data_err)
        };
        let col = Column { phfe: rows.iter().map(|r| r.phfe).collect(), hfe: rows.iter().map(|r| r.hfe).collect() };
        let eta = col.eta(&all, s.ratio_floor);
        let (delta, lo, hi) = if c == reference {
            (None, None, None)
        } else {
            let mut rng = seeding::rng(seeding::derive_seed(config.seed, stream::BOOTSTRAP));
            let mut deltas: Vec<f64> = (0..s.n_boot)
                .map(|_| {
                    let idx: Vec<usize> = (0..seeds.len()).map(|_| rng.random_range(0..seeds.len())).collect();
                    col.eta(&idx, s.ratio_floor) - ref_col.eta(&idx, s.ratio_floor)
                })
                .collect();
            deltas.sort_by(f64::total_cmp);
            let alpha = (1.0 - s.ci_level) / 2.0;
            (
                Some(eta - ref_col.eta(&all, s.ratio_floor)),
                Some(stats::quantile_sorted(&deltas, alpha).map_err(data_err)?),
                Some(stats::quantile_sorted(&deltas, 1.0 - alpha).map_err(data_err)?),
            )
        };
        out.push(HfTransferRow {
            condition: c.clone(),
            n: rows.len(),
            median_phfe: med(&|r| r.phfe)?,
            median_hfe: med(&|r| r.hfe)?,
            median_top5: med(&|r| r.top_hf.top5)?,
            median_top10: med(&|r| r.top_hf.top10)?,
            median_top15: med(&|r| r.top_hf.top15)?,
            median_top20: med(&|r| r.top_hf.top20)?,
            eta,
            delta_eta: delta,
            delta_ci_low: lo,
            delta_ci_high: hi,
        });
    }
    Ok(out)
}

/// `hf-transfer` subcommand: writes `hf_transfer.csv`.
pub fn cmd_hf_transfer(config: &RunConfig, records: &Path) -> Result<Vec<HfTransferRow>, CampaignError> {
    let set = read_records(records)?;
    let rows = hf_transfer_summary(&set, config)?;
    ensure_dir(&config.out_dir)?;
    let mut csv = String::from(
        "condition,n,median_phfe,median_hfe,median_top5_hf,median_top10_hf,median_top15_hf,median_top20_hf,eta,delta_eta,delta_ci_low,delta_ci_high\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.condition,
            r.n,
            csv_num(Some(r.median_phfe)),
            csv_num(Some(r.median_hfe)),
            csv_num(Some(r.median_top5)),
            csv_num(Some(r.median_top10)),
            csv_num(Some(r.median_top15)),
            csv_num(Some(r.median_top20)),
            csv_num(Some(r.eta)),
            csv_num(r.delta_eta),
            csv_num(r.delta_ci_low),
            csv_num(r.delta_ci_high)
        );
    }
    write_atomic(&config.out_dir.join(HF_TRANSFER_CSV), csv.as_bytes())?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CouplingProfile, TopHf};

    fn record(seed: u64, condition: &str, lc: f64, phfe: f64, hfe: f64) -> GeometricRecord {
        GeometricRecord {
            seed,
            condition: condition.into(),
            ls: Some(lc),
            lc,
            phfe,
            hfe,
            sis: 1.0,
            coupling: CouplingProfile { principal: 1.0, similarities: vec![0.0], sis: 1.0 },
            flags: vec![],
            top_hf: TopHf { top5: 0.05, top10: 0.1, top15: 0.15, top20: 0.2 },
            phfe_mav: phfe,
        }
    }

    #[test]
    fn eta_echoes_table_medians() {
        let set = RecordSet {
            records: (0..5).map(|s| record(s, "normal", 1.0, 158.506, 0.0120)).collect(),
            errors: vec![],
        };
        let rows = hf_transfer_summary(&set, &RunConfig::default()).unwrap();
        assert!((rows[0].eta - 7.5707e-5).abs() < 1e-8);
        assert_eq!(rows[0].median_top10, 0.1);
    }

    #[test]
    fn identical_conditions_have_zero_delta() {
        let mut records = Vec::new();
        for s in 0..20 {
            let v = 1.0 + s as f64;
            records.push(record(s, "normal", v, 2.0 * v, v.sqrt()));
            records.push(record(s, "ood", v, 2.0 * v, v.sqrt()));
        }
        let set = RecordSet { records, errors: vec![] };
        let rows = hf_transfer_summary(&set, &RunConfig::default()).unwrap();
        assert_eq!((rows[1].delta_eta, rows[1].delta_ci_low, rows[1].delta_ci_high), (Some(0.0), Some(0.0), Some(0.0)));
    }

    #[test]
    fn orphans_are_named() {
        let set = RecordSet {
            records: vec![record(0, "normal", 1.0, 1.0, 1.0), record(1, "ood", 1.0, 1.0, 1.0)],
            errors: vec![],
        };
        let err = hf_transfer_summary(&set, &RunConfig::default()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let msg = err.to_string();
        assert!(msg.contains("seed 0") && msg.contains("seed 1"), "{msg}");
    }

    #[test]
    fn ood_needs_two_conditions_and_unknown_metrics_are_named() {
        let set = RecordSet { records: vec![record(0, "normal", 1.0, 1.0, 1.0)], errors: vec![] };
        assert!(ood_report(&set, "normal", 1e-12).is_err());
        let mut config = RunConfig::default();
        config.stats.pairs = vec![["lc".into(), "sharpness".into()]];
        let err = correlate_records(&set, &config).unwrap_err();
        assert!(err.to_string().contains("sharpness"));
    }

    #[test]
    fn separated_scores_give_unit_auroc() {
        let mut records = Vec::new();
        for s in 0..10 {
            records.push(record(s, "normal", 1.0, 10.0 + s as f64, 1.0));
            records.push(record(s, "ood", 5.0, 1.0 + s as f64 * 0.1, 1.0));
        }
        let report = ood_report(&RecordSet { records, errors: vec![] }, "normal", 1e-12).unwrap();
        assert_eq!(report.lc_over_phfe.auroc, 1.0);
        assert_eq!(report.auroc_lc, 1.0);
    }
}
