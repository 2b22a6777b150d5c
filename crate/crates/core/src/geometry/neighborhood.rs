use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{
    fd_jacobian_with, metric_tensor, EigenSolver, FiniteDifference, GeometryError, JacobiEigen,
    LatentPoint, SpectralDecomposition, SubspaceBasis, SubspaceJacobian,
};
use crate::generators::Generator;
use crate::seeding::{self, stream};

/// How the neighbourhood `N_r(z)` is sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    /// Every neighbour sits at exactly this distance from `z`.
    pub radius: f64,
    pub count: usize,
    pub seed: u64,
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        Self {
            radius: 1e-2,
            count: 8,
            seed: 0,
        }
    }
}

/// `count` points `z + r·u` with `u` uniform on the unit sphere of the full
/// latent space.
pub fn sample_neighbors(z: &LatentPoint, radius: f64, count: usize, seed: u64) -> Vec<LatentPoint> {
    let mut rng = seeding::rng(seeding::derive_seed(seed, stream::NEIGHBORS));
    (0..count)
        .map(|_| loop {
            let g = seeding::gaussian_vec(&mut rng, z.dim());
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break z.offset(g.into_iter().map(|v| v / norm), radius);
            }
        })
        .collect()
}

/// Spectral conditions observed while probing a neighbourhood.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralFlags {
    /// Some probed point had `λ₁ − λ₂ < tol·λ₁`.
    pub degenerate: bool,
    /// Some neighbour's principal axis aligned better with a secondary base
    /// axis than with `V₁(z)`: the leading eigenvalues crossed in between.
    pub crossing: bool,
}

impl SpectralFlags {
    pub fn any(&self) -> bool {
        self.degenerate || self.crossing
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalComplexity {
    pub value: f64,
    pub flags: SpectralFlags,
}

/// Averaged `|cos|` between `V₁(z)` and each neighbour eigenvector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingProfile {
    /// Mean `|cos(V₁, v'₁)|`.
    pub principal: f64,
    /// Mean `|cos(V₁, v'_k)|` for `k = 2..=P`.
    pub similarities: Vec<f64>,
    pub sis: f64,
}

impl CouplingProfile {
    /// Axes `v'₂…v'₅` followed by `v'_min` (the smallest-eigenvalue axis),
    /// truncated when `P` is small.
    pub fn summary_axes(&self) -> Vec<f64> {
        let n = self.similarities.len();
        let mut out: Vec<f64> = self.similarities.iter().take(4.min(n)).copied().collect();
        if n > 4 {
            out.push(self.similarities[n - 1]);
        }
        out
    }
}

/// `SIS = principal / (Σ secondary + floor)`.
pub fn spectral_isolation_score(principal: f64, secondary: &[f64], floor: f64) -> f64 {
    principal / (secondary.iter().sum::<f64>() + floor)
}

/// Per-axis `1 − sim_OOD(k) / sim_Normal(k)`; `None` where the reference
/// similarity is not positive.
pub fn dimensional_coupling_ratio(
    normal: &CouplingProfile,
    ood: &CouplingProfile,
) -> Result<Vec<Option<f64>>, GeometryError> {
    coupling_ratio(&normal.similarities, &ood.similarities)
}

pub(crate) fn coupling_ratio(normal: &[f64], ood: &[f64]) -> Result<Vec<Option<f64>>, GeometryError> {
    if normal.len() != ood.len() {
        return Err(GeometryError::Dimension {
            what: "coupling profiles",
            expected: normal.len(),
            got: ood.len(),
        });
    }
    Ok(normal
        .iter()
        .zip(ood)
        .map(|(&n, &o)| (n > 0.0).then(|| 1.0 - o / n))
        .collect())
}

/// Sign-invariant `|⟨a, b⟩|` of two unit vectors.
pub fn paired_axis_similarity(a: &[f64], b: &[f64]) -> Result<f64, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::Dimension {
            what: "axis similarity",
            expected: a.len(),
            got: b.len(),
        });
    }
    for v in [a, b] {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(GeometryError::Contract(format!("axis is not unit-norm (|v| = {norm})")));
        }
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs().min(1.0))
}

/// A generator, a fixed subspace basis and the numerical settings needed to
/// probe the metric tensor at arbitrary latent points.
#[derive(Clone, Copy)]
pub struct Probe<'a> {
    generator: &'a dyn Generator,
    basis: &'a SubspaceBasis,
    fd: FiniteDifference,
    solver: &'a dyn EigenSolver,
    degeneracy_tolerance: f64,
}

impl<'a> Probe<'a> {
    pub const DEFAULT_DEGENERACY_TOLERANCE: f64 = 1e-12;

    pub fn new(generator: &'a dyn Generator, basis: &'a SubspaceBasis) -> Self {
        Self {
            generator,
            basis,
            fd: FiniteDifference::default(),
            solver: &JacobiEigen,
            degeneracy_tolerance: Self::DEFAULT_DEGENERACY_TOLERANCE,
        }
    }

    pub fn with_fd(mut self, fd: FiniteDifference) -> Self {
        self.fd = fd;
        self
    }

    pub fn with_solver(mut self, solver: &'a dyn EigenSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_degeneracy_tolerance(mut self, tolerance: f64) -> Self {
        self.degeneracy_tolerance = tolerance;
        self
    }

    pub fn basis(&self) -> &SubspaceBasis {
        self.basis
    }

    pub fn generator(&self) -> &dyn Generator {
        self.generator
    }

    pub fn jacobian(&self, z: &LatentPoint) -> Result<SubspaceJacobian, GeometryError> {
        fd_jacobian_with(self.generator, z, self.basis, self.fd)
    }

    /// `J_sub` at `z` together with the spectrum of its metric tensor.
    pub fn spectrum(&self, z: &LatentPoint) -> Result<(SubspaceJacobian, SpectralDecomposition), GeometryError> {
        let j = self.jacobian(z)?;
        let d = self.solver.decompose(&metric_tensor(&j)?)?;
        Ok((j, d))
    }

    fn is_degenerate(&self, d: &SpectralDecomposition) -> bool {
        d.dim() >= 2
            && (d.eigenvalues[0] <= 0.0
                || d.eigenvalues[0] - d.eigenvalues[1] < self.degeneracy_tolerance * d.eigenvalues[0])
    }

    /// Decomposes the metric tensor at every neighbour of `z` (same basis),
    /// in neighbour order.
    pub fn neighborhood(
        &self,
        z: &LatentPoint,
        base: &SpectralDecomposition,
        spec: &NeighborhoodSpec,
    ) -> Result<Neighborhood, GeometryError> {
        if spec.count == 0 {
            return Err(GeometryError::Contract("neighbour count must be at least 1".into()));
        }
        if !(spec.radius > 0.0 && spec.radius.is_finite()) {
            return Err(GeometryError::Contract(format!(
                "neighbour radius must be positive, got {}",
                spec.radius
            )));
        }
        if base.dim() != self.basis.subspace_dim() {
            return Err(GeometryError::Dimension {
                what: "base spectrum",
                expected: self.basis.subspace_dim(),
                got: base.dim(),
            });
        }
        let mut flags = SpectralFlags {
            degenerate: self.is_degenerate(base),
            crossing: false,
        };
        let v1 = base.principal();
        let mut samples = Vec::with_capacity(spec.count);
        for (k, neighbor) in sample_neighbors(z, spec.radius, spec.count, spec.seed).into_iter().enumerate() {
            let (_, d) = self.spectrum(&neighbor).map_err(|source| GeometryError::Neighbor {
                neighbor: k,
                source: Box::new(source),
            })?;
            flags.degenerate |= self.is_degenerate(&d);
            let moved = d.principal();
            let own = v1.dot(&moved).abs();
            let best_other = (1..base.dim())
                .map(|i| base.eigenvectors.column(i).dot(&moved).abs())
                .fold(0.0, f64::max);
            flags.crossing |= best_other > own;
            samples.push(NeighborSample {
                distance: z.distance(&neighbor),
                spectrum: d,
            });
        }
        Ok(Neighborhood {
            principal: v1,
            samples,
            flags,
        })
    }
}

struct NeighborSample {
    distance: f64,
    spectrum: SpectralDecomposition,
}

/// Spectra at the sampled neighbours of one base point.
pub struct Neighborhood {
    principal: DVector<f64>,
    samples: Vec<NeighborSample>,
    flags: SpectralFlags,
}

impl Neighborhood {
    pub fn flags(&self) -> SpectralFlags {
        self.flags
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `‖V₁(z) − s·V₁(z')‖ / ‖z − z'‖`, `s` aligning the signs.
    pub fn local_complexity(&self) -> LocalComplexity {
        let total: f64 = self
            .samples
            .iter()
            .map(|s| {
                let moved = s.spectrum.principal();
                let sign = if self.principal.dot(&moved) < 0.0 { -1.0 } else { 1.0 };
                (&self.principal - moved * sign).norm() / s.distance
            })
            .sum();
        LocalComplexity {
            value: total / self.samples.len() as f64,
            flags: self.flags,
        }
    }

    /// Mean `|cos|` between `V₁(z)` and every neighbour axis, and the SIS.
    pub fn coupling(&self, floor: f64) -> CouplingProfile {
        let p = self.principal.len();
        let mut means = vec![0.0; p];
        for s in &self.samples {
            for (k, m) in means.iter_mut().enumerate() {
                *m += self.principal.dot(&s.spectrum.eigenvectors.column(k)).abs().min(1.0);
            }
        }
        let n = self.samples.len() as f64;
        means.iter_mut().for_each(|m| *m /= n);
        let principal = means[0];
        let similarities = means[1..].to_vec();
        CouplingProfile {
            sis: spectral_isolation_score(principal, &similarities, floor),
            principal,
            similarities,
        }
    }
}

/// Local Complexity of `generator` at `z` with forward differences and the
/// default eigensolver. `base` is the spectrum at `z` under the same basis.
#[allow(clippy::too_many_arguments)]
pub fn local_complexity(
    generator: &dyn Generator,
    z: &LatentPoint,
    basis: &SubspaceBasis,
    base: &SpectralDecomposition,
    neighbor_radius: f64,
    neighbor_count: usize,
    epsilon: f64,
    seed: u64,
) -> Result<LocalComplexity, GeometryError> {
    let spec = NeighborhoodSpec {
        radius: neighbor_radius,
        count: neighbor_count,
        seed,
    };
    Ok(Probe::new(generator, basis)
        .with_fd(FiniteDifference::forward(epsilon))
        .neighborhood(z, base, &spec)?
        .local_complexity())
}

/// Coupling profile and SIS of `generator` at `z`.
#[allow(clippy::too_many_arguments)]
pub fn spectral_isolation(
    generator: &dyn Generator,
    z: &LatentPoint,
    basis: &SubspaceBasis,
    base: &SpectralDecomposition,
    neighbor_radius: f64,
    neighbor_count: usize,
    epsilon: f64,
    seed: u64,
    floor: f64,
) -> Result<CouplingProfile, GeometryError> {
    if !(floor > 0.0) {
        return Err(GeometryError::Contract(format!("SIS floor must be positive, got {floor}")));
    }
    let spec = NeighborhoodSpec {
        radius: neighbor_radius,
        count: neighbor_count,
        seed,
    };
    Ok(Probe::new(generator, basis)
        .with_fd(FiniteDifference::forward(epsilon))
        .neighborhood(z, base, &spec)?
        .coupling(floor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Builtin;
    use proptest::prelude::*;

    #[test]
    fn sis_formula_examples() {
        let s = spectral_isolation_score(1.0, &[0.1, 0.1, 0.05, 0.05], 1e-8);
        assert!((s - 1.0 / 0.3).abs() < 1e-6);
        assert!((spectral_isolation_score(0.8, &[0.6, 0.0, 0.0, 0.0], 1e-8) - 0.8 / 0.6).abs() < 1e-6);
        assert!((spectral_isolation_score(1.0, &[0.0; 4], 1e-8) - 1e8).abs() < 1e-4);
    }

    #[test]
    fn coupling_ratio_examples() {
        let r = coupling_ratio(&[0.140], &[0.084]).unwrap();
        assert!((r[0].unwrap() - 0.40).abs() < 1e-12);
        assert_eq!(coupling_ratio(&[0.2, 0.1], &[0.2, 0.1]).unwrap(), vec![Some(0.0), Some(0.0)]);
        assert_eq!(coupling_ratio(&[0.2, 0.1], &[0.0, 0.0]).unwrap(), vec![Some(1.0), Some(1.0)]);
        assert_eq!(coupling_ratio(&[0.0], &[0.1]).unwrap(), vec![None]);
        assert!(coupling_ratio(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn axis_similarity_examples() {
        assert_eq!(paired_axis_similarity(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(paired_axis_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((paired_axis_similarity(&[1.0, 0.0], &[h, h]).unwrap() - h).abs() < 1e-15);
        assert!(paired_axis_similarity(&[2.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn neighbors_sit_on_the_sphere() {
        let z = LatentPoint::gaussian(3, 6);
        let pts = sample_neighbors(&z, 0.25, 16, 9);
        assert_eq!(pts.len(), 16);
        for p in &pts {
            assert!((z.distance(p) - 0.25).abs() < 1e-12);
        }
        assert_eq!(pts, sample_neighbors(&z, 0.25, 16, 9));
    }

    #[test]
    fn summary_axes_append_min() {
        let profile = CouplingProfile {
            principal: 1.0,
            similarities: vec![0.5, 0.4, 0.3, 0.2, 0.1, 0.05],
            sis: 0.0,
        };
        assert_eq!(profile.summary_axes(), vec![0.5, 0.4, 0.3, 0.2, 0.05]);
        let short = CouplingProfile {
            principal: 1.0,
            similarities: vec![0.5, 0.4],
            sis: 0.0,
        };
        assert_eq!(short.summary_axes(), vec![0.5, 0.4]);
    }

    #[test]
    fn zero_neighbors_is_a_contract_error() {
        let g = Builtin::saddle();
        let basis = SubspaceBasis::identity(2, 2).unwrap();
        let z = LatentPoint::new(vec![2.0, 0.0]).unwrap();
        let probe = Probe::new(&g, &basis);
        let (_, base) = probe.spectrum(&z).unwrap();
        let spec = NeighborhoodSpec { count: 0, ..Default::default() };
        assert!(matches!(probe.neighborhood(&z, &base, &spec), Err(GeometryError::Contract(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sis_and_profile_bounds(seed in any::<u64>(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let g = Builtin::sphere(4).unwrap();
            let basis = crate::geometry::sample_orthonormal_basis(4, 3, seed).unwrap();
            let z = LatentPoint::new(vec![x, y, 1.0, -0.5]).unwrap();
            let probe = Probe::new(&g, &basis);
            let (_, base) = probe.spectrum(&z).unwrap();
            let floor = 1e-3;
            let profile = probe
                .neighborhood(&z, &base, &NeighborhoodSpec { seed, ..Default::default() })
                .unwrap()
                .coupling(floor);
            prop_assert!(profile.similarities.iter().all(|s| (0.0..=1.0).contains(s)));
            prop_assert!((0.0..=1.0).contains(&profile.principal));
            prop_assert!(profile.sis >= 0.0 && profile.sis <= 1.0 / floor);
        }
    }
}
