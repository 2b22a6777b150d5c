//! Subspace Jacobians, the local metric tensor, its spectrum, and the
//! pointwise descriptors derived from them.

mod basis;
mod jacobian;
mod neighborhood;
mod record;
mod spectral;

pub use basis::{sample_orthonormal_basis, SubspaceBasis};
pub use jacobian::{
    fd_jacobian, fd_jacobian_with, metric_tensor, Difference, FiniteDifference, MetricTensor,
    SubspaceJacobian,
};
pub use neighborhood::{
    dimensional_coupling_ratio, local_complexity, paired_axis_similarity, sample_neighbors,
    spectral_isolation, spectral_isolation_score, CouplingProfile, LocalComplexity, Neighborhood,
    NeighborhoodSpec, Probe, SpectralFlags,
};
pub use record::{
    diagnose_point, DiagnosticSettings, GeometricRecord, PointDiagnosis, RecordFlag, TopHf,
    TOP_HF_PERCENTS,
};
pub use spectral::{
    eigendecompose, explained_variance, local_scaling, principal_projection, EigenSolver,
    JacobiEigen, SpectralDecomposition,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generators::GeneratorError;
use crate::imaging::ImagingError;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("generator failed at {}: {source}", match .column { Some(c) => format!("column {c}"), None => "the base point".to_string() })]
    Evaluation {
        /// `None` for the unperturbed base evaluation.
        column: Option<usize>,
        #[source]
        source: GeneratorError,
    },
    #[error("probing neighbour {neighbor} failed: {source}")]
    Neighbor {
        neighbor: usize,
        #[source]
        source: Box<GeometryError>,
    },
    #[error("matrix is not symmetric (max deviation {deviation:e})")]
    Asymmetric { deviation: f64 },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("spectrum has no positive mass")]
    ZeroSpectrum,
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// A latent code `z ∈ R^E` with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentPoint(Vec<f64>);

impl LatentPoint {
    pub fn new(values: Vec<f64>) -> Result<Self, GeometryError> {
        if values.is_empty() {
            return Err(GeometryError::Contract("latent point must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("latent point"));
        }
        Ok(Self(values))
    }

    /// A standard-normal draw derived from `seed`.
    pub fn gaussian(seed: u64, dim: usize) -> Self {
        Self(crate::seeding::gaussian_latent(seed, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self + step · direction`; the caller keeps the result finite.
    pub(crate) fn offset(&self, direction: impl IntoIterator<Item = f64>, step: f64) -> Self {
        Self(self.0.iter().zip(direction).map(|(z, d)| z + step * d).collect())
    }

    pub(crate) fn distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl TryFrom<Vec<f64>> for LatentPoint {
    type Error = GeometryError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}
