//! Rank statistics, resampling and the ratio scores built on them.

use std::io::Write;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::{self, stream};

/// Default floor for ratio denominators.
pub const RATIO_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {a} vs {b}")]
    Length { a: usize, b: usize },
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("non-finite input value")]
    NonFinite,
    #[error("correlation undefined: an input has zero rank variance")]
    ZeroVariance,
    #[error("AUROC needs both classes present")]
    SingleClass,
    #[error("relative drop undefined for a zero baseline")]
    UndefinedDrop,
    #[error("{0}")]
    Contract(String),
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::Length { a: x.len(), b: y.len() });
    }
    if x.len() < min {
        return Err(StatsError::TooFew { needed: min, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Tie-averaged ranks scaled by two, so every entry is an exact integer:
/// a value in a tie block spanning sorted positions `i..j` gets `i + j + 1`
/// (1-based rank average times two).
fn doubled_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Tie-averaged (fractional) ranks, 1-based.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    doubled_ranks(values).into_iter().map(|r| r / 2.0).collect()
}

/// Spearman's ρ: the Pearson correlation of tie-averaged ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 2)?;
    let n1 = (x.len() + 1) as f64;
    // Doubled ranks centred on n+1 are exact integers, so all sums are exact.
    let dx: Vec<f64> = doubled_ranks(x).into_iter().map(|r| r - n1).collect();
    let dy: Vec<f64> = doubled_ranks(y).into_iter().map(|r| r - n1).collect();
    let sxy: f64 = dx.iter().zip(&dy).map(|(a, b)| a * b).sum();
    let sxx: f64 = dx.iter().map(|a| a * a).sum();
    let syy: f64 = dy.iter().map(|b| b * b).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Type-7 quantile of already sorted data: linear interpolation between
/// order statistics at position `q·(n−1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Result<f64, StatsError> {
    if sorted.is_empty() {
        return Err(StatsError::TooFew { needed: 1, got: 0 });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(StatsError::Contract(format!("quantile level {q} outside [0, 1]")));
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Type-7 quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> Result<f64, StatsError> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

pub fn median(values: &[f64]) -> Result<f64, StatsError> {
    quantile(values, 0.5)
}

/// Arithmetic mean, accumulated as offsets from the first value so that a
/// constant input returns that constant exactly.
pub fn mean(values: &[f64]) -> f64 {
    let Some(&first) = values.first() else { return f64::NAN };
    first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub rho_mean: f64,
    /// Population std of ρ across runs.
    pub rho_std: f64,
    /// Runs that produced a defined ρ.
    pub runs: usize,
    /// Runs skipped for zero rank variance.
    pub skipped: usize,
    pub subsample_size: usize,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Per-run ρ in run order.
    pub run_rhos: Vec<f64>,
}

impl CorrelationSummary {
    /// Attaches a percentile-bootstrap CI on the mean of the per-run ρ.
    pub fn with_ci(mut self, n_boot: usize, level: f64, seed: u64) -> Result<Self, StatsError> {
        let (lo, hi) = bootstrap_ci(&self.run_rhos, n_boot, level, seed)?;
        self.ci_low = Some(lo);
        self.ci_high = Some(hi);
        Ok(self)
    }
}

/// Spearman ρ over `runs` subsamples of size `subsample_n`, each drawn
/// without replacement from a seed derived from `(seed, run)`.
pub fn subsampled_correlation(
    pool_x: &[f64],
    pool_y: &[f64],
    subsample_n: usize,
    runs: usize,
    seed: u64,
) -> Result<CorrelationSummary, StatsError> {
    check_pair(pool_x, pool_y, 2)?;
    if runs == 0 {
        return Err(StatsError::Contract("runs must be at least 1".into()));
    }
    if subsample_n < 2 || subsample_n > pool_x.len() {
        return Err(StatsError::Contract(format!(
            "subsample size {subsample_n} must be in 2..={}",
            pool_x.len()
        )));
    }
    let mut rhos = Vec::with_capacity(runs);
    let mut skipped = 0;
    for run in 0..runs {
        let mut rng = seeding::rng(seeding::derive_seed(seed, stream::SUBSAMPLE.wrapping_add(run as u64)));
        let mut picks = index::sample(&mut rng, pool_x.len(), subsample_n).into_vec();
        picks.sort_unstable();
        let x: Vec<f64> = picks.iter().map(|&i| pool_x[i]).collect();
        let y: Vec<f64> = picks.iter().map(|&i| pool_y[i]).collect();
        match spearman(&x, &y) {
            Ok(r) => rhos.push(r),
            Err(StatsError::ZeroVariance) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if rhos.is_empty() {
        return Err(StatsError::ZeroVariance);
    }
    Ok(CorrelationSummary {
        rho_mean: mean(&rhos).clamp(-1.0, 1.0),
        rho_std: population_std(&rhos),
        runs: rhos.len(),
        skipped,
        subsample_size: subsample_n,
        ci_low: None,
        ci_high: None,
        run_rhos: rhos,
    })
}

/// Percentile bootstrap CI on the mean.
pub fn bootstrap_ci(values: &[f64], n_boot: usize, level: f64, seed: u64) -> Result<(f64, f64), StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFew { needed: 2, got: values.len() });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Contract(format!("confidence level {level} outside (0, 1)")));
    }
    if n_boot == 0 {
        return Err(StatsError::Contract("n_boot must be at least 1".into()));
    }
    let n = values.len();
    let mut rng = seeding::rng(seeding::derive_seed(seed, stream::BOOTSTRAP));
    let mut means: Vec<f64> = (0..n_boot)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&means, alpha)?, quantile_sorted(&means, 1.0 - alpha)?))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from the positive rank sum.
pub fn auroc(scores: &[f64], positive: &[bool]) -> Result<f64, StatsError> {
    if scores.len() != positive.len() {
        return Err(StatsError::Length { a: scores.len(), b: positive.len() });
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(StatsError::SingleClass);
    }
    let ranks = doubled_ranks(scores);
    let pos_sum: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    // Doubled Mann-Whitney U, exact in f64 for any realistic n.
    let u2 = pos_sum - (n_pos * (n_pos + 1)) as f64;
    Ok(u2 / (2 * n_pos * n_neg) as f64)
}

/// `η = HFE / max(PHFE, floor)`.
pub fn transfer_efficiency(hfe_image: f64, phfe_latent: f64, floor: f64) -> f64 {
    hfe_image / phfe_latent.max(floor)
}

/// Relative change `(ρ_ood − ρ_normal) / ρ_normal`.
pub fn correlation_drop(rho_normal: f64, rho_ood: f64) -> Result<f64, StatsError> {
    if rho_normal == 0.0 || !rho_normal.is_finite() {
        return Err(StatsError::UndefinedDrop);
    }
    Ok((rho_ood - rho_normal) / rho_normal)
}

/// The LC/PHFE efficiency score used for OOD detection.
pub fn ood_score(lc: f64, phfe: f64, floor: f64) -> f64 {
    lc / phfe.max(floor)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Normal,
    Ood,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub auroc: f64,
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
}

impl DetectionResult {
    /// Scores OOD samples as the positive class.
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self, StatsError> {
        let positive: Vec<bool> = labels.iter().map(|l| *l == Label::Ood).collect();
        let auroc = auroc(&scores, &positive)?;
        Ok(Self { auroc, scores, labels })
    }

    /// `score,label` rows for external ROC tooling.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "score,label")?;
        for (s, l) in self.scores.iter().zip(&self.labels) {
            let label = match l {
                Label::Normal => "normal",
                Label::Ood => "ood",
            };
            writeln!(w, "{s:.8e},{label}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let cube: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        assert_eq!(spearman(&x, &cube).unwrap(), 1.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(spearman(&x, &neg).unwrap(), -1.0);
        // ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4): centred (-1.5, 0, 0, 1.5) vs
        // (-1.5, -0.5, 0.5, 1.5): sxy = 4.5, sxx = 4.5, syy = 5
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(StatsError::ZeroVariance));
        assert!(matches!(spearman(&[1.0], &[1.0]), Err(StatsError::TooFew { .. })));
    }

    #[test]
    fn quantile_examples() {
        let d: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((quantile(&d, 0.9).unwrap() - 9.1).abs() < 1e-12);
        assert!((quantile(&d, 0.95).unwrap() - 9.55).abs() < 1e-12);
        assert_eq!(quantile(&d, 1.0).unwrap(), 10.0);
        assert_eq!(quantile(&[3.0], 0.9).unwrap(), 3.0);
        assert!(quantile(&[], 0.5).is_err());
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[3.0, 1.0, 2.0, 0.0], &[true, true, false, false]).unwrap(), 0.75);
        assert_eq!(auroc(&[5.0, 6.0, 1.0], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(auroc(&[1.0; 6], &[true, false, true, false, true, false]).unwrap(), 0.5);
        assert_eq!(auroc(&[1.0, 2.0], &[true, true]), Err(StatsError::SingleClass));
    }

    #[test]
    fn ratio_scores() {
        assert!((transfer_efficiency(0.0120, 158.506, RATIO_FLOOR) - 7.5707e-5).abs() < 1e-8);
        assert_eq!(transfer_efficiency(2.5, 2.5, RATIO_FLOOR), 1.0);
        assert_eq!(transfer_efficiency(3.0, 0.0, 1e-12), 3.0 / 1e-12);
        assert!((correlation_drop(0.413, 0.083).unwrap() + 0.799).abs() < 1e-3);
        assert_eq!(correlation_drop(0.3, 0.0).unwrap(), -1.0);
        assert_eq!(correlation_drop(0.0, 0.1), Err(StatsError::UndefinedDrop));
        assert_eq!(ood_score(2.0, 4.0, RATIO_FLOOR), 0.5);
        assert_eq!(ood_score(0.0, 7.0, RATIO_FLOOR), 0.0);
        assert_eq!(ood_score(1.0, 0.0, 1e-12), 1e12);
    }

    #[test]
    fn subsampling_degenerate_cases() {
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        let s = subsampled_correlation(&x, &x, 20, 7, 3).unwrap();
        assert_eq!((s.rho_mean, s.rho_std, s.runs), (1.0, 0.0, 7));
        let y: Vec<f64> = x.iter().map(|v| (v * 0.7).sin()).collect();
        let full = subsampled_correlation(&x, &y, 50, 1, 9).unwrap();
        assert_eq!(full.rho_mean, spearman(&x, &y).unwrap());
        let again = subsampled_correlation(&x, &y, 30, 10, 9).unwrap();
        assert_eq!(again, subsampled_correlation(&x, &y, 30, 10, 9).unwrap());
    }

    #[test]
    fn bootstrap_examples() {
        assert_eq!(bootstrap_ci(&[2.5; 10], 200, 0.95, 1).unwrap(), (2.5, 2.5));
        let v: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64).collect();
        let (l95, h95) = bootstrap_ci(&v, 500, 0.95, 4).unwrap();
        let (l99, h99) = bootstrap_ci(&v, 500, 0.99, 4).unwrap();
        assert!(l99 <= l95 && h95 <= h99);
        assert_eq!(bootstrap_ci(&v, 500, 0.95, 4).unwrap(), (l95, h95));
    }

    proptest! {
        #[test]
        fn spearman_invariant_under_monotone_maps(
            x in prop::collection::vec(-5.0f64..5.0, 3..40),
            seed in any::<u64>(),
        ) {
            let mut rng = seeding::rng(seed);
            let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-2.0..2.0)).collect();
            let Ok(base) = spearman(&x, &y) else { return Ok(()); };
            for f in [f64::exp, |v: f64| v * v * v, |v: f64| 3.0 * v - 1.0] {
                let fx: Vec<f64> = x.iter().map(|&v| f(v)).collect();
                prop_assert!((spearman(&fx, &y).unwrap() - base).abs() <= 1e-12);
            }
            prop_assert!((-1.0..=1.0).contains(&base));
            prop_assert_eq!(spearman(&y, &x).unwrap(), base);
        }

        #[test]
        fn auroc_invariant_under_monotone_maps(
            scores in prop::collection::vec(-3.0f64..3.0, 2..60),
            labels in prop::collection::vec(any::<bool>(), 60),
        ) {
            let labels = &labels[..scores.len()];
            let Ok(a) = auroc(&scores, labels) else { return Ok(()); };
            let t: Vec<f64> = scores.iter().map(|v| v.exp() * 2.0 + 1.0).collect();
            prop_assert_eq!(auroc(&t, labels).unwrap(), a);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn bootstrap_brackets_mean_of_symmetric_data(
            half in prop::collection::vec(0.0f64..10.0, 2..30),
            level in 0.5f64..0.99,
            seed in any::<u64>(),
        ) {
            let data: Vec<f64> = half.iter().flat_map(|v| [5.0 + v, 5.0 - v]).collect();
            let (lo, hi) = bootstrap_ci(&data, 400, level, seed).unwrap();
            prop_assert!(lo <= 5.0 + 1e-12 && 5.0 - 1e-12 <= hi);
        }

        #[test]
        fn ratio_scores_are_homogeneous(num in 0.0f64..100.0, den in 1e-3f64..100.0, c in 0.1f64..10.0) {
            let a = ood_score(c * num, den, RATIO_FLOOR);
            prop_assert!((a - c * ood_score(num, den, RATIO_FLOOR)).abs() <= 1e-12 * a.abs().max(1.0));
            let b = transfer_efficiency(c * num, den, RATIO_FLOOR);
            prop_assert!((b - c * transfer_efficiency(num, den, RATIO_FLOOR)).abs() <= 1e-12 * b.abs().max(1.0));
            prop_assert_eq!(correlation_drop(den, den).unwrap(), 0.0);
        }
    }
}
