use nalgebra::DMatrix;

use super::GeometryError;
use crate::seeding::{self, stream};

/// An `E×P` matrix with orthonormal columns spanning the probed subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    columns: DMatrix<f64>,
    seed: u64,
}

impl SubspaceBasis {
    /// Wraps an explicit basis, checking `WᵀW = I` within 1e-10.
    pub fn from_columns(columns: DMatrix<f64>, seed: u64) -> Result<Self, GeometryError> {
        let (e, p) = columns.shape();
        if p == 0 || p > e {
            return Err(GeometryError::Dimension {
                what: "subspace dimension",
                expected: e,
                got: p,
            });
        }
        let gram = columns.transpose() * &columns;
        let deviation = (gram - DMatrix::identity(p, p)).amax();
        if !(deviation <= 1e-10) {
            return Err(GeometryError::Contract(format!(
                "basis columns are not orthonormal (deviation {deviation:e})"
            )));
        }
        Ok(Self { columns, seed })
    }

    /// The canonical basis `[e₁ … e_P]`.
    pub fn identity(latent_dim: usize, subspace_dim: usize) -> Result<Self, GeometryError> {
        Self::from_columns(DMatrix::identity(latent_dim, subspace_dim), 0)
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// Column `w_i` as a contiguous slice (storage is column-major).
    pub fn column(&self, i: usize) -> &[f64] {
        let e = self.latent_dim();
        &self.columns.as_slice()[i * e..(i + 1) * e]
    }

    pub fn latent_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Draws an `E×P` standard-normal matrix from `seed` and orthonormalizes its
/// columns with two passes of modified Gram-Schmidt.
pub fn sample_orthonormal_basis(
    latent_dim: usize,
    subspace_dim: usize,
    seed: u64,
) -> Result<SubspaceBasis, GeometryError> {
    if subspace_dim == 0 || latent_dim == 0 {
        return Err(GeometryError::Contract("dimensions must be positive".into()));
    }
    if subspace_dim > latent_dim {
        return Err(GeometryError::Dimension {
            what: "subspace dimension (must not exceed latent dimension)",
            expected: latent_dim,
            got: subspace_dim,
        });
    }
    let mut rng = seeding::rng(seeding::derive_seed(seed, stream::BASIS));
    loop {
        let draws = seeding::gaussian_vec(&mut rng, latent_dim * subspace_dim);
        let mut m = DMatrix::from_column_slice(latent_dim, subspace_dim, &draws);
        if gram_schmidt(&mut m) {
            return SubspaceBasis::from_columns(m, seed);
        }
        // rank-deficient draw (probability zero); draw again from the same stream
    }
}

fn gram_schmidt(m: &mut DMatrix<f64>) -> bool {
    for j in 0..m.ncols() {
        for _pass in 0..2 {
            for k in 0..j {
                let proj = m.column(k).dot(&m.column(j));
                let prev = m.column(k).clone_owned();
                m.column_mut(j).axpy(-proj, &prev, 1.0);
            }
        }
        let norm = m.column(j).norm();
        if norm < 1e-8 {
            return false;
        }
        m.column_mut(j).unscale_mut(norm);
    }
    true
}
