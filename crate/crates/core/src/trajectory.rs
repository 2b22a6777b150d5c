//! Slerp paths in noise space and the trajectories a sampler induces along
//! them: path length, tortuosity, stepwise jumps and paired resampling.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generators::{Generator, GeneratorError};
use crate::geometry::LatentPoint;
use crate::seeding::{self, stream};
use crate::stats::{self, StatsError};

/// Default `ε` in `τ = L / (D + ε)`.
pub const TORTUOSITY_EPS: f64 = 1e-8;
/// Default number of slerp steps.
pub const DEFAULT_STEPS: usize = 20;
const PARALLEL_CUTOFF: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("{0}")]
    Contract(String),
    #[error("sampler failed at path step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: GeneratorError,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

fn contract(msg: impl Into<String>) -> TrajectoryError {
    TrajectoryError::Contract(msg.into())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Spherical linear interpolation between raw (unnormalized) vectors.
///
/// Falls back to linear interpolation when the endpoints are within `1e-6`
/// radians of parallel or antiparallel.
pub fn slerp(z_a: &LatentPoint, z_b: &LatentPoint, alpha: f64) -> Result<LatentPoint, TrajectoryError> {
    let (a, b) = (z_a.as_slice(), z_b.as_slice());
    if a.len() != b.len() {
        return Err(contract(format!("endpoint dimensions differ: {} vs {}", a.len(), b.len())));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(contract(format!("alpha {alpha} outside [0, 1]")));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(contract("slerp endpoints must be nonzero"));
    }
    let cos = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    let omega = cos.clamp(-1.0, 1.0).acos();
    let (wa, wb) = if !(PARALLEL_CUTOFF..=std::f64::consts::PI - PARALLEL_CUTOFF).contains(&omega) {
        (1.0 - alpha, alpha)
    } else {
        let s = omega.sin();
        (((1.0 - alpha) * omega).sin() / s, (alpha * omega).sin() / s)
    };
    let out = a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect();
    LatentPoint::new(out).map_err(|e| contract(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationPath {
    pub endpoints: (LatentPoint, LatentPoint),
    pub alphas: Vec<f64>,
    pub points: Vec<LatentPoint>,
}

impl InterpolationPath {
    pub fn steps(&self) -> usize {
        self.alphas.len() - 1
    }
}

/// `K + 1` slerp points at `α = k/K`. The endpoints are stored exactly.
pub fn build_path(z_a: &LatentPoint, z_b: &LatentPoint, steps: usize) -> Result<InterpolationPath, TrajectoryError> {
    if steps == 0 {
        return Err(contract("a path needs at least one step"));
    }
    let alphas: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let mut points = Vec::with_capacity(steps + 1);
    for (k, &alpha) in alphas.iter().enumerate() {
        points.push(match k {
            0 => {
                slerp(z_a, z_b, 0.0)?;
                z_a.clone()
            }
            k if k == steps => z_b.clone(),
            _ => slerp(z_a, z_b, alpha)?,
        });
    }
    Ok(InterpolationPath { endpoints: (z_a.clone(), z_b.clone()), alphas, points })
}

/// Path endpoints for pair `pair` under a base seed. Every condition uses
/// the same endpoints for the same pair.
pub fn endpoint_pair(seed: u64, pair: u64, dim: usize) -> Result<(LatentPoint, LatentPoint), TrajectoryError> {
    let base = seeding::derive_seed(seed, pair);
    let draw = |s| {
        let mut rng = seeding::rng(seeding::derive_seed(base, s));
        LatentPoint::new(seeding::gaussian_vec(&mut rng, dim)).map_err(|e| contract(e.to_string()))
    };
    Ok((draw(stream::ENDPOINT_A)?, draw(stream::ENDPOINT_B)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub condition: String,
    pub pair: u64,
    pub latents: Vec<Vec<f64>>,
    pub increments: Vec<f64>,
    pub length: f64,
    pub endpoint_distance: f64,
    pub tortuosity: f64,
    pub excess: f64,
    pub q90: f64,
    pub q95: f64,
    pub max: f64,
}

impl TrajectoryRecord {
    /// Builds the record and every path metric from an ordered point list.
    pub fn from_latents(
        condition: impl Into<String>,
        pair: u64,
        latents: Vec<Vec<f64>>,
        eps: f64,
    ) -> Result<Self, TrajectoryError> {
        if latents.len() < 2 {
            return Err(contract("a trajectory needs at least two points"));
        }
        let dim = latents[0].len();
        if latents.iter().any(|h| h.len() != dim) {
            return Err(contract("trajectory points have inconsistent dimensions"));
        }
        let increments: Vec<f64> = latents.windows(2).map(|w| distance(&w[0], &w[1])).collect();
        let length: f64 = increments.iter().sum();
        let endpoint_distance = distance(&latents[0], &latents[latents.len() - 1]);
        let (q90, q95, max) = extremal_increments(&increments)?;
        Ok(Self {
            condition: condition.into(),
            pair,
            latents,
            length,
            endpoint_distance,
            tortuosity: length / (endpoint_distance + eps),
            excess: length - endpoint_distance,
            increments,
            q90,
            q95,
            max,
        })
    }

    /// Named scalar metric for paired comparisons.
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "length" | "L" => Some(self.length),
            "endpoint_distance" | "D" => Some(self.endpoint_distance),
            "tortuosity" | "tau" => Some(self.tortuosity),
            "excess" | "E" => Some(self.excess),
            "q90" => Some(self.q90),
            "q95" => Some(self.q95),
            "max" => Some(self.max),
            _ => None,
        }
    }
}

/// Pushes every path point through `sampler` (in parallel when it is
/// concurrent-safe) and measures the induced trajectory.
pub fn induce_trajectory(
    sampler: &dyn Generator,
    path: &InterpolationPath,
    condition: &str,
    pair: u64,
    eps: f64,
) -> Result<TrajectoryRecord, TrajectoryError> {
    let eval = |(step, z): (usize, &LatentPoint)| {
        sampler
            .evaluate(z)
            .map(|img| img.into_data())
            .map_err(|source| TrajectoryError::Step { step, source })
    };
    let latents: Vec<Vec<f64>> = if sampler.descriptor().concurrent_safe {
        let results: Vec<_> = path.points.par_iter().enumerate().map(eval).collect();
        results.into_iter().collect::<Result<_, _>>()?
    } else {
        path.points.iter().enumerate().map(eval).collect::<Result<_, _>>()?
    };
    TrajectoryRecord::from_latents(condition, pair, latents, eps)
}

/// `(Δ^0.90, Δ^0.95, Δ^max)` with type-7 quantiles.
pub fn extremal_increments(increments: &[f64]) -> Result<(f64, f64, f64), TrajectoryError> {
    if increments.is_empty() {
        return Err(contract("no increments"));
    }
    let mut sorted = increments.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((
        stats::quantile_sorted(&sorted, 0.90)?,
        stats::quantile_sorted(&sorted, 0.95)?,
        sorted[sorted.len() - 1],
    ))
}

/// Fraction of pairs where `b` strictly exceeds `a`.
pub fn paired_frac(values_a: &[f64], values_b: &[f64]) -> Result<f64, TrajectoryError> {
    if values_a.len() != values_b.len() {
        return Err(StatsError::Length { a: values_a.len(), b: values_b.len() }.into());
    }
    if values_a.is_empty() {
        return Err(contract("no pairs"));
    }
    let wins = values_a.iter().zip(values_b).filter(|(a, b)| b > a).count();
    Ok(wins as f64 / values_a.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    /// Mean over resamples of `mean_b / mean_a`.
    pub ratio_mean: f64,
    /// Population std over resamples.
    pub ratio_std: f64,
    pub diff_mean: f64,
    pub diff_std: f64,
    pub resamples: usize,
    pub sample_size: usize,
    /// Resamples whose `mean_a` was zero; excluded from the ratio only.
    pub skipped: usize,
}

/// Paired resampling with replacement: `n_mc` resamples of
/// `⌈fraction·n⌉` index pairs, resample `r` drawn from its own derived seed.
pub fn monte_carlo_ratio(
    values_a: &[f64],
    values_b: &[f64],
    n_mc: usize,
    fraction: f64,
    seed: u64,
) -> Result<MonteCarloSummary, TrajectoryError> {
    let n = values_a.len();
    if n != values_b.len() {
        return Err(StatsError::Length { a: n, b: values_b.len() }.into());
    }
    if n == 0 || n_mc == 0 {
        return Err(contract("monte_carlo_ratio needs at least one pair and one resample"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(contract(format!("fraction {fraction} outside (0, 1]")));
    }
    let m = resample_size(n, fraction);
    let mut ratios = Vec::with_capacity(n_mc);
    let mut diffs = Vec::with_capacity(n_mc);
    for r in 0..n_mc {
        let mut rng = seeding::rng(seeding::derive_seed(seed, stream::MONTE_CARLO.wrapping_add(r as u64)));
        let picks: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
        let ma = stats::mean(&picks.iter().map(|&i| values_a[i]).collect::<Vec<_>>());
        let mb = stats::mean(&picks.iter().map(|&i| values_b[i]).collect::<Vec<_>>());
        diffs.push(mb - ma);
        if ma != 0.0 {
            ratios.push(mb / ma);
        }
    }
    let skipped = n_mc - ratios.len();
    let (ratio_mean, ratio_std) = if ratios.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (stats::mean(&ratios), stats::population_std(&ratios))
    };
    Ok(MonteCarloSummary {
        ratio_mean,
        ratio_std,
        diff_mean: stats::mean(&diffs),
        diff_std: stats::population_std(&diffs),
        resamples: n_mc,
        sample_size: m,
        skipped,
    })
}

/// `⌈fraction·n⌉`, tolerant of products like `0.8·100` landing a hair
/// above an integer.
pub fn resample_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// One metric compared across two conditions sharing endpoint pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub metric: String,
    pub condition_a: String,
    pub condition_b: String,
    pub values_a: Vec<f64>,
    pub values_b: Vec<f64>,
    /// Fraction of pairs where condition b is strictly larger.
    pub frac: f64,
    /// `mean(b) / mean(a)` over all pairs.
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSummary>,
}

impl PairedComparison {
    pub fn new(
        metric: impl Into<String>,
        condition_a: impl Into<String>,
        condition_b: impl Into<String>,
        values_a: Vec<f64>,
        values_b: Vec<f64>,
    ) -> Result<Self, TrajectoryError> {
        let frac = paired_frac(&values_a, &values_b)?;
        let ratio = stats::mean(&values_b) / stats::mean(&values_a);
        Ok(Self {
            metric: metric.into(),
            condition_a: condition_a.into(),
            condition_b: condition_b.into(),
            values_a,
            values_b,
            frac,
            ratio,
            monte_carlo: None,
        })
    }

    pub fn with_monte_carlo(mut self, n_mc: usize, fraction: f64, seed: u64) -> Result<Self, TrajectoryError> {
        self.monte_carlo = Some(monte_carlo_ratio(&self.values_a, &self.values_b, n_mc, fraction, seed)?);
        Ok(self)
    }
}

/// CSV summary, one row per pair per condition.
pub fn write_summary_csv<'a>(
    records: impl IntoIterator<Item = &'a TrajectoryRecord>,
    mut w: impl Write,
) -> std::io::Result<()> {
    writeln!(w, "pair,condition,L,D,tau,E,q90,q95,max")?;
    for r in records {
        writeln!(
            w,
            "{},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            r.pair, r.condition, r.length, r.endpoint_distance, r.tortuosity, r.excess, r.q90, r.q95, r.max
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Builtin;
    use proptest::prelude::*;

    fn lp(v: &[f64]) -> LatentPoint {
        LatentPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn slerp_examples() {
        let (a, b) = (lp(&[1.0, 0.0]), lp(&[0.0, 1.0]));
        assert_eq!(slerp(&a, &b, 0.0).unwrap(), a);
        let mid = slerp(&a, &b, 0.5).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((mid.as_slice()[0] - h).abs() < 1e-15 && (mid.as_slice()[1] - h).abs() < 1e-15);
        let end = slerp(&a, &b, 1.0).unwrap();
        assert!(end.distance(&b) < 1e-15);
        let par = slerp(&lp(&[1.0, 2.0]), &lp(&[2.0, 4.0]), 0.5).unwrap();
        assert_eq!(par.as_slice(), &[1.5, 3.0]);
        assert!(slerp(&lp(&[0.0, 0.0]), &b, 0.5).is_err());
    }

    #[test]
    fn path_examples() {
        let (a, b) = (lp(&[1.0, 0.0]), lp(&[0.0, 1.0]));
        let p1 = build_path(&a, &b, 1).unwrap();
        assert_eq!(p1.points, vec![a.clone(), b.clone()]);
        let p2 = build_path(&a, &b, 2).unwrap();
        assert!((p2.points[1].as_slice()[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let p20 = build_path(&a, &b, 20).unwrap();
        assert_eq!(p20.points.len(), 21);
        let rec = induce_trajectory(&Builtin::identity(2), &p20, "normal", 0, TORTUOSITY_EPS).unwrap();
        assert_eq!(rec.increments.len(), 20);
        assert!(build_path(&a, &b, 0).is_err());
    }

    #[test]
    fn record_examples() {
        let straight = TrajectoryRecord::from_latents("id", 0, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]], TORTUOSITY_EPS).unwrap();
        assert_eq!((straight.length, straight.endpoint_distance, straight.excess), (2.0, 2.0, 0.0));
        assert!((straight.tortuosity - 2.0 / (2.0 + 1e-8)).abs() < 1e-15);
        let corner = TrajectoryRecord::from_latents("id", 0, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]], TORTUOSITY_EPS).unwrap();
        assert!((corner.tortuosity - std::f64::consts::SQRT_2).abs() < 1e-7);
        assert!((corner.excess - (2.0 - std::f64::consts::SQRT_2)).abs() < 1e-12);
        let flat = TrajectoryRecord::from_latents("c", 0, vec![vec![3.0]; 4], TORTUOSITY_EPS).unwrap();
        assert_eq!((flat.length, flat.endpoint_distance, flat.tortuosity, flat.excess), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn increments_and_frac() {
        let d: Vec<f64> = (1..=10).map(f64::from).collect();
        let (q90, q95, max) = extremal_increments(&d).unwrap();
        assert!((q90 - 9.1).abs() < 1e-12 && (q95 - 9.55).abs() < 1e-12 && max == 10.0);
        assert_eq!(extremal_increments(&[2.0; 5]).unwrap(), (2.0, 2.0, 2.0));
        assert_eq!(extremal_increments(&[0.3]).unwrap(), (0.3, 0.3, 0.3));
        assert!(extremal_increments(&[]).is_err());
        assert_eq!(paired_frac(&[1.0, 1.0, 1.0, 1.0], &[2.0, 2.0, 0.0, 3.0]).unwrap(), 0.75);
        assert_eq!(paired_frac(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(paired_frac(&[1.0, 2.0], &[2.0, 3.0]).unwrap(), 1.0);
        assert!(paired_frac(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn monte_carlo_constants() {
        let s = monte_carlo_ratio(&[1.0; 30], &[1.2; 30], 50, 0.8, 3).unwrap();
        assert_eq!((s.ratio_mean, s.ratio_std), (1.2, 0.0));
        assert!((s.diff_mean - 0.2).abs() < 1e-15 && s.diff_std < 1e-15);
        let v: Vec<f64> = (0..20).map(|i| f64::from(i) + 1.0).collect();
        let same = monte_carlo_ratio(&v, &v, 40, 0.5, 1).unwrap();
        assert_eq!((same.ratio_mean, same.ratio_std), (1.0, 0.0));
        let zeros = monte_carlo_ratio(&[0.0; 5], &[1.0; 5], 10, 1.0, 0).unwrap();
        assert_eq!(zeros.skipped, 10);
        assert_eq!(resample_size(100, 0.8), 80);
        assert_eq!(resample_size(7, 0.5), 4);
    }

    proptest! {
        #[test]
        fn slerp_norm_and_symmetry(
            a in prop::collection::vec(-3.0f64..3.0, 3),
            b in prop::collection::vec(-3.0f64..3.0, 3),
            alpha in 0.0f64..=1.0,
        ) {
            let (na, nb) = (norm(&a), norm(&b));
            prop_assume!(na > 1e-3 && nb > 1e-3);
            let ua = lp(&a.iter().map(|v| v / na).collect::<Vec<_>>());
            let ub = lp(&b.iter().map(|v| v / nb).collect::<Vec<_>>());
            let cos: f64 = ua.as_slice().iter().zip(ub.as_slice()).map(|(x, y)| x * y).sum();
            prop_assume!(cos.abs() < 1.0 - 1e-9);
            prop_assert!((slerp(&ua, &ub, alpha).unwrap().norm() - 1.0).abs() < 1e-10);
            let (za, zb) = (lp(&a), lp(&b));
            let fwd = slerp(&za, &zb, alpha).unwrap();
            let back = slerp(&zb, &za, 1.0 - alpha).unwrap();
            prop_assert!(fwd.distance(&back) < 1e-10);
        }

        #[test]
        fn record_identities(points in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 2..30)) {
            let r = TrajectoryRecord::from_latents("x", 0, points, TORTUOSITY_EPS).unwrap();
            prop_assert!((r.length - r.increments.iter().sum::<f64>()).abs() <= 1e-10);
            prop_assert!(r.length >= r.endpoint_distance - 1e-10);
            prop_assert!((r.excess - (r.length - r.endpoint_distance)).abs() <= 1e-10);
            prop_assert!((r.tortuosity * (r.endpoint_distance + TORTUOSITY_EPS) - r.length).abs() <= 1e-10 * r.length.max(1.0));
            prop_assert!(r.max >= r.q95 && r.q95 >= r.q90 && r.tortuosity >= 0.0);
        }

        #[test]
        fn collinear_paths_have_unit_tortuosity(
            dir in prop::collection::vec(-1.0f64..1.0, 3),
            steps in prop::collection::vec(0.01f64..2.0, 1..15),
        ) {
            prop_assume!(norm(&dir) > 1e-2);
            let mut t = 0.0;
            let mut pts = vec![vec![0.0; 3]];
            for s in steps {
                t += s;
                pts.push(dir.iter().map(|d| d * t).collect());
            }
            let r = TrajectoryRecord::from_latents("line", 0, pts, TORTUOSITY_EPS).unwrap();
            prop_assert!(r.tortuosity >= 1.0 - 1e-6 && r.tortuosity <= 1.0 + 1e-9);
        }
    }
}
