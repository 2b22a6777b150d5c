//! The generator abstraction, analytic built-ins, and the external
//! `MPROBE/1` client.
//!
//! Everything that maps a latent vector to a tensor implements
//! [`Generator`]: image generators probed by the geometry module and the
//! latent-to-latent "sampler conditions" used for trajectory analysis alike.

mod builtin;
pub mod external;
pub mod protocol;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{make_builtin, AnalyticJacobian, Builtin, BuiltinKind, BuiltinParams, FamilyVariant};
pub use external::{connect_external, Endpoint, ExternalGenerator};
pub use protocol::ProtocolError;

use crate::geometry::LatentPoint;
use crate::imaging::{ImageTensor, Shape};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("latent dimension mismatch: generator expects {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("generator produced a non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorDescriptor {
    pub name: String,
    pub latent_dim: usize,
    pub output_shape: Shape,
    /// Whether `evaluate` may be called from several threads at once.
    pub concurrent_safe: bool,
}

impl GeneratorDescriptor {
    pub fn new(
        name: impl Into<String>,
        latent_dim: usize,
        output_shape: Shape,
        concurrent_safe: bool,
    ) -> Result<Self, GeneratorError> {
        if latent_dim == 0 || output_shape.is_empty() {
            return Err(GeneratorError::InvalidParams(format!(
                "latent_dim {latent_dim} and output shape {output_shape} must be non-empty"
            )));
        }
        Ok(Self {
            name: name.into(),
            latent_dim,
            output_shape,
            concurrent_safe,
        })
    }

    pub fn output_len(&self) -> usize {
        self.output_shape.len()
    }

    pub(crate) fn check_latent(&self, z: &LatentPoint) -> Result<(), GeneratorError> {
        if z.dim() != self.latent_dim {
            return Err(GeneratorError::Dimension {
                expected: self.latent_dim,
                got: z.dim(),
            });
        }
        Ok(())
    }
}

/// A deterministic map `G: R^E → R^{C×H×W}`.
///
/// Implementations must be referentially transparent: evaluating the same
/// `z` twice yields bit-identical output.
pub trait Generator: Send + Sync {
    fn descriptor(&self) -> &GeneratorDescriptor;

    fn evaluate(&self, z: &LatentPoint) -> Result<ImageTensor, GeneratorError>;
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn descriptor(&self) -> &GeneratorDescriptor {
        (**self).descriptor()
    }

    fn evaluate(&self, z: &LatentPoint) -> Result<ImageTensor, GeneratorError> {
        (**self).evaluate(z)
    }
}

impl<G: Generator + ?Sized> Generator for Arc<G> {
    fn descriptor(&self) -> &GeneratorDescriptor {
        (**self).descriptor()
    }

    fn evaluate(&self, z: &LatentPoint) -> Result<ImageTensor, GeneratorError> {
        (**self).evaluate(z)
    }
}

/// Wraps raw output values, turning the first non-finite entry into an error.
pub(crate) fn finish_output(shape: Shape, values: Vec<f64>) -> Result<ImageTensor, GeneratorError> {
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(GeneratorError::NonFinite { index });
    }
    ImageTensor::new(shape, values).map_err(|e| GeneratorError::InvalidParams(e.to_string()))
}
