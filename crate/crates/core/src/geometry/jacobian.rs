use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{GeometryError, LatentPoint, SubspaceBasis};
use crate::generators::Generator;
use crate::imaging::Shape;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difference {
    /// `(G(z + εw) − G(z)) / ε`, `P + 1` evaluations.
    #[default]
    Forward,
    /// `(G(z + εw) − G(z − εw)) / 2ε`, `2P` evaluations.
    Central,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifference {
    pub epsilon: f64,
    #[serde(default)]
    pub scheme: Difference,
}

impl FiniteDifference {
    pub const DEFAULT_EPSILON: f64 = 1e-3;

    pub fn forward(epsilon: f64) -> Self {
        Self {
            epsilon,
            scheme: Difference::Forward,
        }
    }

    pub fn central(epsilon: f64) -> Self {
        Self {
            epsilon,
            scheme: Difference::Central,
        }
    }
}

impl Default for FiniteDifference {
    fn default() -> Self {
        Self::forward(Self::DEFAULT_EPSILON)
    }
}

/// `J_sub`: a `D_output×P` finite-difference estimate of `J·W`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceJacobian {
    matrix: DMatrix<f64>,
    step: f64,
    shape: Shape,
}

impl SubspaceJacobian {
    pub fn from_parts(matrix: DMatrix<f64>, step: f64, shape: Shape) -> Self {
        Self {
            matrix,
            step,
            shape,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Output layout each column reshapes to.
    pub fn shape(&self) -> Shape {
        self.shape
    }
}

/// Forward-difference subspace Jacobian with `P + 1` generator calls.
pub fn fd_jacobian(
    generator: &dyn Generator,
    z: &LatentPoint,
    basis: &SubspaceBasis,
    epsilon: f64,
) -> Result<SubspaceJacobian, GeometryError> {
    fd_jacobian_with(generator, z, basis, FiniteDifference::forward(epsilon))
}

/// Subspace Jacobian under an explicit difference scheme.
///
/// Evaluations are issued in a fixed order: the base point first (forward
/// scheme only), then the perturbed points by column index.
pub fn fd_jacobian_with(
    generator: &dyn Generator,
    z: &LatentPoint,
    basis: &SubspaceBasis,
    fd: FiniteDifference,
) -> Result<SubspaceJacobian, GeometryError> {
    if !(fd.epsilon > 0.0 && fd.epsilon.is_finite()) {
        return Err(GeometryError::Contract(format!(
            "finite-difference step must be positive, got {}",
            fd.epsilon
        )));
    }
    let descriptor = generator.descriptor();
    if basis.latent_dim() != descriptor.latent_dim {
        return Err(GeometryError::Dimension {
            what: "basis rows vs generator latent_dim",
            expected: descriptor.latent_dim,
            got: basis.latent_dim(),
        });
    }
    if z.dim() != descriptor.latent_dim {
        return Err(GeometryError::Dimension {
            what: "latent point",
            expected: descriptor.latent_dim,
            got: z.dim(),
        });
    }
    let shape = descriptor.output_shape;
    let rows = shape.len();
    let p = basis.subspace_dim();
    let eval = |point: &LatentPoint, column: Option<usize>| {
        generator
            .evaluate(point)
            .map_err(|source| GeometryError::Evaluation { column, source })
            .and_then(|img| {
                if img.shape().len() != rows {
                    Err(GeometryError::Dimension {
                        what: "generator output",
                        expected: rows,
                        got: img.shape().len(),
                    })
                } else {
                    Ok(img.into_data())
                }
            })
    };

    let mut matrix = DMatrix::zeros(rows, p);
    match fd.scheme {
        Difference::Forward => {
            let base = eval(z, None)?;
            for i in 0..p {
                let shifted = eval(&z.offset(basis.column(i).iter().copied(), fd.epsilon), Some(i))?;
                let mut col = matrix.column_mut(i);
                for (r, (s, b)) in shifted.iter().zip(&base).enumerate() {
                    col[r] = (s - b) / fd.epsilon;
                }
            }
        }
        Difference::Central => {
            for i in 0..p {
                let w = basis.column(i);
                let plus = eval(&z.offset(w.iter().copied(), fd.epsilon), Some(i))?;
                let minus = eval(&z.offset(w.iter().copied(), -fd.epsilon), Some(i))?;
                let mut col = matrix.column_mut(i);
                for (r, (a, b)) in plus.iter().zip(&minus).enumerate() {
                    col[r] = (a - b) / (2.0 * fd.epsilon);
                }
            }
        }
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite("subspace Jacobian"));
    }
    Ok(SubspaceJacobian {
        matrix,
        step: fd.epsilon,
        shape,
    })
}

/// The local metric tensor `A = J_subᵀ J_sub` (symmetric, PSD).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTensor {
    matrix: DMatrix<f64>,
}

impl MetricTensor {
    /// Accepts an explicit square matrix symmetric within `1e-10` (relative
    /// to its largest entry). The stored matrix is symmetrized.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self, GeometryError> {
        if !matrix.is_square() {
            return Err(GeometryError::Dimension {
                what: "metric tensor columns",
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("metric tensor"));
        }
        let deviation = asymmetry(&matrix);
        if deviation > 1e-10 * matrix.amax().max(1.0) {
            return Err(GeometryError::Asymmetric { deviation });
        }
        Ok(Self {
            matrix: symmetrize(matrix),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub(super) fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

pub fn metric_tensor(j: &SubspaceJacobian) -> Result<MetricTensor, GeometryError> {
    if j.matrix.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite("subspace Jacobian"));
    }
    Ok(MetricTensor {
        matrix: symmetrize(j.matrix.transpose() * &j.matrix),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Builtin, GeneratorDescriptor, GeneratorError};
    use crate::imaging::ImageTensor;

    fn diag_linear() -> Builtin {
        Builtin::linear(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]), Shape::flat(2)).unwrap()
    }

    #[test]
    fn linear_map_is_exact() {
        let g = diag_linear();
        let basis = SubspaceBasis::identity(2, 2).unwrap();
        let z = LatentPoint::new(vec![0.3, -1.2]).unwrap();
        let j = fd_jacobian(&g, &z, &basis, 1e-3).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        assert!((j.matrix() - expected).amax() < 1e-9);
    }

    #[test]
    fn quadratic_forward_difference_carries_epsilon() {
        let g = Builtin::polynomial_1d(vec![0.0, 0.0, 1.0]).unwrap();
        let basis = SubspaceBasis::identity(1, 1).unwrap();
        let z = LatentPoint::new(vec![1.0]).unwrap();
        let j = fd_jacobian(&g, &z, &basis, 1e-3).unwrap();
        assert!((j.matrix()[(0, 0)] - 2.001).abs() < 1e-10);
        let central = fd_jacobian_with(&g, &z, &basis, FiniteDifference::central(1e-3)).unwrap();
        assert!((central.matrix()[(0, 0)] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn zero_map_gives_zero_jacobian() {
        let g = Builtin::linear(DMatrix::zeros(3, 2), Shape::flat(3)).unwrap();
        let basis = sample_basis();
        let z = LatentPoint::new(vec![1.0, 2.0]).unwrap();
        let j = fd_jacobian(&g, &z, &basis, 1e-3).unwrap();
        assert!(j.matrix().iter().all(|&v| v == 0.0));
        let a = metric_tensor(&j).unwrap();
        assert!(a.matrix().iter().all(|&v| v == 0.0));
    }

    fn sample_basis() -> SubspaceBasis {
        super::super::sample_orthonormal_basis(2, 2, 11).unwrap()
    }

    #[test]
    fn metric_tensor_examples() {
        let j = SubspaceJacobian::from_parts(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]), 1e-3, Shape::flat(2));
        let a = metric_tensor(&j).unwrap();
        assert_eq!(a.matrix(), &DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]));
        let j = SubspaceJacobian::from_parts(DMatrix::from_row_slice(2, 1, &[1.0, 1.0]), 1e-3, Shape::flat(2));
        assert_eq!(metric_tensor(&j).unwrap().matrix()[(0, 0)], 2.0);
    }

    #[test]
    fn asymmetric_matrices_are_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(MetricTensor::from_matrix(m), Err(GeometryError::Asymmetric { .. })));
    }

    struct Poisoned {
        descriptor: GeneratorDescriptor,
    }

    impl Generator for Poisoned {
        fn descriptor(&self) -> &GeneratorDescriptor {
            &self.descriptor
        }

        fn evaluate(&self, z: &LatentPoint) -> Result<ImageTensor, GeneratorError> {
            // blows up once the second coordinate is pushed past 0.5
            if z.as_slice()[1] > 0.5 {
                return Err(GeneratorError::NonFinite { index: 0 });
            }
            Ok(ImageTensor::new(Shape::flat(2), z.as_slice().to_vec()).unwrap())
        }
    }

    #[test]
    fn failing_column_is_reported() {
        let g = Poisoned {
            descriptor: GeneratorDescriptor::new("poisoned", 2, Shape::flat(2), true).unwrap(),
        };
        let basis = SubspaceBasis::identity(2, 2).unwrap();
        let z = LatentPoint::new(vec![0.0, 0.4999]).unwrap();
        match fd_jacobian(&g, &z, &basis, 1e-3) {
            Err(GeometryError::Evaluation { column: Some(1), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let z = LatentPoint::new(vec![0.0, 0.6]).unwrap();
        assert!(matches!(
            fd_jacobian(&g, &z, &basis, 1e-3),
            Err(GeometryError::Evaluation { column: None, .. })
        ));
    }

    #[test]
    fn counts_evaluations() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        struct Counting(Builtin, AtomicUsize);
        impl Generator for Counting {
            fn descriptor(&self) -> &GeneratorDescriptor {
                self.0.descriptor()
            }
            fn evaluate(&self, z: &LatentPoint) -> Result<ImageTensor, GeneratorError> {
                self.1.fetch_add(1, Ordering::SeqCst);
                self.0.evaluate(z)
            }
        }
        let g = Counting(Builtin::identity(5), AtomicUsize::new(0));
        let basis = super::super::sample_orthonormal_basis(5, 3, 1).unwrap();
        let z = LatentPoint::gaussian(0, 5);
        fd_jacobian(&g, &z, &basis, 1e-3).unwrap();
        assert_eq!(g.1.load(Ordering::SeqCst), 4);
    }
}
