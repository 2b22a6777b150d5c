use nalgebra::{DMatrix, DVector};

use super::jacobian::asymmetry;
use super::{GeometryError, MetricTensor, SubspaceJacobian};
use crate::imaging::ImageTensor;

/// Eigenpairs of a metric tensor, eigenvalues in descending order.
///
/// Column `i` of `eigenvectors` is the unit eigenvector for `eigenvalues[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The principal eigenvector `V₁`.
    pub fn principal(&self) -> DVector<f64> {
        self.eigenvectors.column(0).clone_owned()
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.eigenvectors.column(k).clone_owned()
    }

    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.eigenvectors * DMatrix::from_diagonal(&self.eigenvalues) * self.eigenvectors.transpose()
    }

    /// Relative gap `(λ₁ − λ₂) / λ₁`; `None` for a 1-dimensional spectrum or
    /// a zero leading eigenvalue.
    pub fn principal_gap(&self) -> Option<f64> {
        if self.dim() < 2 || self.eigenvalues[0] <= 0.0 {
            return None;
        }
        Some((self.eigenvalues[0] - self.eigenvalues[1]) / self.eigenvalues[0])
    }
}

/// Symmetric eigensolver used by every probe. Swappable so tests can inject
/// adversarial (e.g. sign-flipped) decompositions.
pub trait EigenSolver: Send + Sync {
    fn decompose(&self, a: &MetricTensor) -> Result<SpectralDecomposition, GeometryError>;
}

/// Cyclic Jacobi rotations followed by a descending sort and sign
/// canonicalization (largest-magnitude entry positive, first on ties).
#[derive(Clone, Copy, Debug, Default)]
pub struct JacobiEigen;

impl JacobiEigen {
    const MAX_SWEEPS: usize = 64;
}

impl EigenSolver for JacobiEigen {
    fn decompose(&self, a: &MetricTensor) -> Result<SpectralDecomposition, GeometryError> {
        let m = a.matrix();
        let deviation = asymmetry(m);
        if deviation > 1e-10 * m.amax().max(1.0) {
            return Err(GeometryError::Asymmetric { deviation });
        }
        let n = m.nrows();
        // Column-major scratch copies; flat slices keep the rotation loops tight.
        let mut work: Vec<f64> = m.as_slice().to_vec();
        let mut vecs: Vec<f64> = DMatrix::<f64>::identity(n, n).as_slice().to_vec();

        let scale = m.norm();
        for _ in 0..Self::MAX_SWEEPS {
            let mut off = 0.0;
            for j in 0..n {
                for i in 0..n {
                    if i != j {
                        off += work[j * n + i].powi(2);
                    }
                }
            }
            let off = f64::sqrt(off);
            if off <= f64::EPSILON * 1e-2 * scale || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut work, &mut vecs, n, p, q);
                }
            }
        }
        let work = DMatrix::from_column_slice(n, n, &work);
        let vecs = DMatrix::from_column_slice(n, n, &vecs);

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| work[(j, j)].total_cmp(&work[(i, i)]).then(i.cmp(&j)));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| work[(i, i)]));
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = vecs.column(src).clone_owned();
            col.unscale_mut(col.norm());
            canonicalize_sign(&mut col);
            eigenvectors.set_column(dst, &col);
        }
        Ok(SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }
}

/// One Jacobi rotation zeroing entry `(p, q)` of the column-major `n×n` `work`.
fn rotate(work: &mut [f64], vecs: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = work[q * n + p];
    if apq == 0.0 {
        return;
    }
    let app = work[p * n + p];
    let aqq = work[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    for k in 0..n {
        let akp = work[p * n + k];
        let akq = work[q * n + k];
        work[p * n + k] = c * akp - s * akq;
        work[q * n + k] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = work[k * n + p];
        let aqk = work[k * n + q];
        work[k * n + p] = c * apk - s * aqk;
        work[k * n + q] = s * apk + c * aqk;
    }
    work[q * n + p] = 0.0;
    work[p * n + q] = 0.0;
    for k in 0..n {
        let vkp = vecs[p * n + k];
        let vkq = vecs[q * n + k];
        vecs[p * n + k] = c * vkp - s * vkq;
        vecs[q * n + k] = s * vkp + c * vkq;
    }
}

fn canonicalize_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Eigendecomposition with the default Jacobi solver.
pub fn eigendecompose(a: &MetricTensor) -> Result<SpectralDecomposition, GeometryError> {
    JacobiEigen.decompose(a)
}

/// Local Scaling `ψ = ½ Σ log λᵢ` over eigenvalues above
/// `rank_tolerance · max(λ_max, 1e-300)`.
///
/// Returns negative infinity when no eigenvalue clears the threshold.
pub fn local_scaling(d: &SpectralDecomposition, rank_tolerance: f64) -> f64 {
    let max = d.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = rank_tolerance * max.max(1e-300);
    let kept: Vec<f64> = d
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > threshold && l > 0.0)
        .collect();
    if kept.is_empty() {
        return f64::NEG_INFINITY;
    }
    0.5 * kept.iter().map(|l| l.ln()).sum::<f64>()
}

/// Cumulative eigenvalue ratio of the top `k` eigenvalues, with negative
/// rounding noise clamped to zero.
pub fn explained_variance(d: &SpectralDecomposition, k: usize) -> Result<f64, GeometryError> {
    if k == 0 || k > d.dim() {
        return Err(GeometryError::Dimension {
            what: "explained-variance rank",
            expected: d.dim(),
            got: k,
        });
    }
    let clamped: Vec<f64> = d.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if !(total > 0.0) {
        return Err(GeometryError::ZeroSpectrum);
    }
    Ok(clamped[..k].iter().sum::<f64>() / total)
}

/// `P₁ = J_sub · V₁`, reshaped to the generator's output layout.
pub fn principal_projection(
    j: &SubspaceJacobian,
    d: &SpectralDecomposition,
) -> Result<ImageTensor, GeometryError> {
    if j.matrix().ncols() != d.dim() {
        return Err(GeometryError::Dimension {
            what: "principal projection",
            expected: j.matrix().ncols(),
            got: d.dim(),
        });
    }
    let p1 = j.matrix() * d.eigenvectors.column(0);
    Ok(ImageTensor::new(j.shape(), p1.as_slice().to_vec())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Shape;

    fn metric(rows: usize, values: &[f64]) -> MetricTensor {
        MetricTensor::from_matrix(DMatrix::from_row_slice(rows, rows, values)).unwrap()
    }

    fn decomposition(eigenvalues: &[f64]) -> SpectralDecomposition {
        let n = eigenvalues.len();
        SpectralDecomposition {
            eigenvalues: DVector::from_row_slice(eigenvalues),
            eigenvectors: DMatrix::identity(n, n),
        }
    }

    #[test]
    fn diagonal_spectrum_is_sorted() {
        let d = eigendecompose(&metric(2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        assert_eq!(d.eigenvalues.as_slice(), &[9.0, 4.0]);
        assert_eq!(d.principal().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn classic_two_by_two() {
        let d = eigendecompose(&metric(2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert!((d.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((d.eigenvalues[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((d.principal() - DVector::from_row_slice(&[h, h])).amax() < 1e-14);
    }

    #[test]
    fn identity_has_orthonormal_vectors() {
        let d = eigendecompose(&metric(2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(d.eigenvalues.as_slice(), &[1.0, 1.0]);
        let gram = d.eigenvectors.transpose() * &d.eigenvectors;
        assert!((gram - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn signs_are_canonical() {
        let d = eigendecompose(&metric(3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0])).unwrap();
        for k in 0..3 {
            let v = d.vector(k);
            let imax = v.iamax();
            assert!(v[imax] > 0.0);
        }
    }

    #[test]
    fn local_scaling_examples() {
        assert!((local_scaling(&decomposition(&[9.0, 4.0]), 1e-12) - 6f64.ln()).abs() < 1e-15);
        assert_eq!(local_scaling(&decomposition(&[1.0, 1.0]), 1e-12), 0.0);
        assert!((local_scaling(&decomposition(&[4.0, 0.0]), 1e-12) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(local_scaling(&decomposition(&[0.0, 0.0]), 1e-12), f64::NEG_INFINITY);
        assert_eq!(local_scaling(&decomposition(&[0.0, -1e-20]), 1e-12), f64::NEG_INFINITY);
    }

    #[test]
    fn explained_variance_examples() {
        let d = decomposition(&[6.0, 3.0, 1.0]);
        assert!((explained_variance(&d, 1).unwrap() - 0.6).abs() < 1e-15);
        assert!((explained_variance(&d, 2).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(explained_variance(&d, 3).unwrap(), 1.0);
        assert!(matches!(explained_variance(&decomposition(&[0.0, 0.0]), 1), Err(GeometryError::ZeroSpectrum)));
        assert!(explained_variance(&d, 0).is_err());
        assert!(explained_variance(&d, 4).is_err());
        // negative rounding noise is clamped
        let noisy = decomposition(&[2.0, -1e-17]);
        assert_eq!(explained_variance(&noisy, 1).unwrap(), 1.0);
    }

    #[test]
    fn principal_projection_examples() {
        let j = SubspaceJacobian::from_parts(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]), 1e-3, Shape::flat(2));
        let along_second = SpectralDecomposition {
            eigenvalues: DVector::from_row_slice(&[9.0, 4.0]),
            eigenvectors: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        };
        assert_eq!(principal_projection(&j, &along_second).unwrap().data(), &[0.0, 3.0]);
        let along_first = decomposition(&[4.0, 9.0]);
        assert_eq!(principal_projection(&j, &along_first).unwrap().data(), &[2.0, 0.0]);
        let zero = SubspaceJacobian::from_parts(DMatrix::zeros(2, 2), 1e-3, Shape::flat(2));
        assert_eq!(principal_projection(&zero, &along_first).unwrap().data(), &[0.0, 0.0]);
        assert!(principal_projection(&j, &decomposition(&[1.0, 1.0, 1.0])).is_err());
    }
}
