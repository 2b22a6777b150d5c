//! Local Riemannian geometry diagnostics for black-box generative maps.
//!
//! A generator is anything that maps a latent vector to a `C×H×W` tensor.
//! `mprobe` probes such a map with matrix-free finite differences restricted
//! to a random orthonormal subspace, builds the local metric tensor
//! `A = JᵀJ`, and derives a battery of instability descriptors from it:
//!
//! - **Local Scaling** (LS): half the log-volume expansion of the subspace.
//! - **Local Complexity** (LC): the rotation rate of the principal
//!   eigenvector across a small latent neighbourhood.
//! - **PHFE / HFE**: Laplacian energy of the principal projection `J·V₁`
//!   and of the generated image itself.
//! - **SIS** and coupling profiles: how isolated the principal axis stays
//!   under perturbation.
//! - Trajectory statistics for slerp paths pushed through a sampler.
//! - Rank statistics (Spearman, AUROC, bootstrap and Monte Carlo resampling).
//!
//! Built-in analytic generators with closed-form Jacobians double as test
//! oracles, and real models plug in through the `MPROBE/1` wire protocol
//! (see [`generators::protocol`]).
//!
//! ```
//! use mprobe::generators::{Builtin, Generator};
//! use mprobe::geometry::{self, LatentPoint};
//!
//! let saddle = Builtin::saddle();
//! let basis = geometry::sample_orthonormal_basis(2, 2, 7).unwrap();
//! let z = LatentPoint::new(vec![2.0, 0.0]).unwrap();
//! let jac = geometry::fd_jacobian(&saddle, &z, &basis, 1e-3).unwrap();
//! let spectrum = geometry::eigendecompose(&geometry::metric_tensor(&jac).unwrap()).unwrap();
//! // J = diag(4, 1) up to a rotation of the subspace, so LS = ln 4.
//! let ls = geometry::local_scaling(&spectrum, 1e-12);
//! assert!((ls - 4f64.ln()).abs() < 1e-3);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod generators;
pub mod geometry;
pub mod imaging;
pub mod seeding;
pub mod stats;
pub mod trajectory;

pub use generators::{Builtin, Generator, GeneratorDescriptor, GeneratorError};
pub use geometry::{GeometricRecord, LatentPoint, SpectralDecomposition, SubspaceBasis};
pub use imaging::{ImageTensor, Shape};
