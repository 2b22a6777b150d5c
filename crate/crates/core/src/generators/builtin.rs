use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{finish_output, Generator, GeneratorDescriptor, GeneratorError};
use crate::geometry::LatentPoint;
use crate::imaging::{ImageTensor, Shape};
use crate::seeding::{self, stream};

/// Generators with a closed-form Jacobian, used as finite-difference oracles.
pub trait AnalyticJacobian: Generator {
    /// The exact `D_output×E` Jacobian at `z`.
    fn analytic_jacobian(&self, z: &LatentPoint) -> Result<DMatrix<f64>, GeneratorError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinKind {
    Linear,
    Saddle,
    Sphere,
    RandomFeature,
    CoupledFamily,
    DecoupledFamily,
    CurlSampler,
    ContractionSampler,
    Polynomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyVariant {
    Coupled,
    Decoupled,
}

/// Optional parameters for [`make_builtin`]; unset fields take per-kind
/// defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinParams {
    /// Latent dimension `E` (linear, sphere, random_feature, samplers, families).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_dim: Option<usize>,
    /// `[C, H, W]` (linear, random_feature).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_shape: Option<[usize; 3]>,
    /// Row-major rows of `M` for a linear map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Diagonal of `M` for a square linear map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    /// Hidden width of the random-feature map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    /// Seed for random-feature weights (the cell seed is not used).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_seed: Option<u64>,
    /// Rotation rate of the curl sampler, radians per unit of `‖z‖`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Scale of the contraction sampler.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    /// Polynomial coefficients, constant term first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

/// Family constants. The principal direction gets a large scale so the
/// curvature term rotates it slowly and smoothly.
const FAMILY_SIDE: usize = 16;
const FAMILY_PRINCIPAL_SCALE: f64 = 100.0;
const FAMILY_KNOB_RANGE: (f64, f64) = (0.5, 2.0);
const FAMILY_MAX_LATENT: usize = 16;
const DECOUPLED_DETAIL: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
struct Family {
    variant: FamilyVariant,
    knob: f64,
    jitter: f64,
    principal_pattern: Vec<f64>,
    rest_patterns: Vec<Vec<f64>>,
    rest_scales: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
enum Map {
    Linear(DMatrix<f64>),
    Saddle,
    Polynomial(Vec<f64>),
    Sphere,
    RandomFeature { inner: DMatrix<f64>, outer: DMatrix<f64> },
    Family(Box<Family>),
    Curl { omega: f64 },
}

/// A built-in analytic generator. Pure, deterministic and concurrent-safe.
#[derive(Clone, Debug, PartialEq)]
pub struct Builtin {
    descriptor: GeneratorDescriptor,
    map: Map,
}

fn invalid(msg: impl Into<String>) -> GeneratorError {
    GeneratorError::InvalidParams(msg.into())
}

impl Builtin {
    fn new(name: &str, latent_dim: usize, shape: Shape, map: Map) -> Result<Self, GeneratorError> {
        Ok(Self {
            descriptor: GeneratorDescriptor::new(name, latent_dim, shape, true)?,
            map,
        })
    }

    /// `G(z) = M z`, with the rows of `M` laid out as `shape`.
    pub fn linear(m: DMatrix<f64>, shape: Shape) -> Result<Self, GeneratorError> {
        if m.nrows() != shape.len() {
            return Err(invalid(format!("matrix has {} rows but shape {shape} holds {}", m.nrows(), shape.len())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
        let e = m.ncols();
        Self::new("linear", e, shape, Map::Linear(m))
    }

    /// The identity sampler `h(z) = z`.
    pub fn identity(latent_dim: usize) -> Self {
        Self::linear(DMatrix::identity(latent_dim, latent_dim), Shape::flat(latent_dim))
            .expect("identity is a valid linear map")
    }

    /// `h(z) = factor · z`.
    pub fn contraction(latent_dim: usize, factor: f64) -> Result<Self, GeneratorError> {
        if !factor.is_finite() {
            return Err(invalid("contraction factor must be finite"));
        }
        let mut g = Self::linear(DMatrix::identity(latent_dim, latent_dim) * factor, Shape::flat(latent_dim))?;
        g.descriptor.name = "contraction_sampler".into();
        Ok(g)
    }

    /// `G(z₁, z₂) = (z₁², z₂)`; eigenvalues of `JᵀJ` cross where `|2z₁| = 1`.
    pub fn saddle() -> Self {
        Self::new("saddle", 2, Shape::flat(2), Map::Saddle).expect("static shape")
    }

    /// Scalar polynomial `G(z) = Σ c_k z^k`.
    pub fn polynomial_1d(coefficients: Vec<f64>) -> Result<Self, GeneratorError> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid("polynomial needs at least one finite coefficient"));
        }
        Self::new("polynomial", 1, Shape::flat(1), Map::Polynomial(coefficients))
    }

    /// Radial projection `G(z) = z / ‖z‖` onto the unit sphere.
    pub fn sphere(latent_dim: usize) -> Result<Self, GeneratorError> {
        Self::new("sphere", latent_dim, Shape::flat(latent_dim), Map::Sphere)
    }

    /// `G(z) = B tanh(A z)` with Gaussian weights drawn from `weights_seed`.
    pub fn random_feature(latent_dim: usize, hidden: usize, shape: Shape, weights_seed: u64) -> Result<Self, GeneratorError> {
        if hidden == 0 || latent_dim == 0 {
            return Err(invalid("random_feature needs positive latent_dim and hidden width"));
        }
        let mut rng = seeding::rng(seeding::derive_seed(weights_seed, stream::WEIGHTS));
        let a = seeding::gaussian_vec(&mut rng, hidden * latent_dim);
        let b = seeding::gaussian_vec(&mut rng, shape.len() * hidden);
        let inner = DMatrix::from_row_slice(hidden, latent_dim, &a) / (latent_dim as f64).sqrt();
        let outer = DMatrix::from_row_slice(shape.len(), hidden, &b) / (hidden as f64).sqrt();
        Self::new("random_feature", latent_dim, shape, Map::RandomFeature { inner, outer })
    }

    /// Rotates each coordinate pair `(z_{2i}, z_{2i+1})` by `ω·‖z‖`; an odd
    /// trailing coordinate passes through.
    pub fn curl(latent_dim: usize, omega: f64) -> Result<Self, GeneratorError> {
        if !omega.is_finite() {
            return Err(invalid("curl omega must be finite"));
        }
        Self::new("curl_sampler", latent_dim, Shape::flat(latent_dim), Map::Curl { omega })
    }

    /// A member of the synthetic coupled/decoupled families (see
    /// [`FamilyVariant`]), outputting a `1×16×16` image.
    ///
    /// `G(z) = g(z)·φ + Σ_{i≥1} s_i z_i ψ_i` with
    /// `g(z) = 100·z₀ + (κ/2)·Σ_{i≥1} z_i²` and orthonormal Walsh patterns
    /// `φ, ψ_i`. The knob `κ ∈ [0.5, 2]` sets how fast the principal
    /// direction `∇g` rotates, i.e. the Local Complexity. In the coupled
    /// family `φ` mixes a flat pattern with a checkerboard at weight
    /// `sin²θ = κ/2.5`, so PHFE grows with `κ`. In the decoupled family the
    /// checkerboard weight follows an independent per-seed jitter
    /// `a ∈ [0.5, 2]` and stays small: curvature only bends the flat
    /// (global) component.
    pub fn family(variant: FamilyVariant, latent_dim: usize, seed: u64) -> Result<Self, GeneratorError> {
        if !(2..=FAMILY_MAX_LATENT).contains(&latent_dim) {
            return Err(invalid(format!("family latent_dim must be in 2..={FAMILY_MAX_LATENT}, got {latent_dim}")));
        }
        let knob = Self::family_knob_for_seed(seed);
        let jitter = log_uniform(weyl(seed, stream::FAMILY_JITTER), FAMILY_KNOB_RANGE);
        let flat = walsh(0, 0);
        let checker = walsh(1, 1);
        let (wf, wc) = match variant {
            FamilyVariant::Coupled => {
                let s2 = knob / (FAMILY_KNOB_RANGE.1 + 0.5);
                ((1.0 - s2).sqrt(), s2.sqrt())
            }
            FamilyVariant::Decoupled => {
                let c = DECOUPLED_DETAIL * jitter;
                let n = (1.0 + c * c).sqrt();
                (1.0 / n, c / n)
            }
        };
        let principal_pattern = flat.iter().zip(&checker).map(|(f, c)| wf * f + wc * c).collect();
        let rest = rest_pattern_indices();
        let rest_patterns = rest[..latent_dim - 1].iter().map(|&(u, v)| walsh(u, v)).collect();
        let rest_scales = (0..latent_dim - 1)
            .map(|i| {
                let t = if latent_dim > 2 { i as f64 / (latent_dim - 2) as f64 } else { 0.0 };
                2.0 * 0.25f64.powf(t)
            })
            .collect();
        let name = match variant {
            FamilyVariant::Coupled => "coupled_family",
            FamilyVariant::Decoupled => "decoupled_family",
        };
        Self::new(
            name,
            latent_dim,
            Shape::new(1, FAMILY_SIDE, FAMILY_SIDE),
            Map::Family(Box::new(Family {
                variant,
                knob,
                jitter,
                principal_pattern,
                rest_patterns,
                rest_scales,
            })),
        )
    }

    /// The ground-truth curvature knob `κ` of family member `seed`.
    ///
    /// Knob and jitter come from two Weyl sequences over the seed, so over
    /// consecutive seeds they are equidistributed and mutually uncorrelated.
    pub fn family_knob_for_seed(seed: u64) -> f64 {
        log_uniform(weyl(seed, stream::FAMILY_KNOB), FAMILY_KNOB_RANGE)
    }

    /// `κ` for family generators, `None` otherwise.
    pub fn family_knob(&self) -> Option<f64> {
        match &self.map {
            Map::Family(f) => Some(f.knob),
            _ => None,
        }
    }

    /// The decoupled family's detail jitter `a`, `None` otherwise.
    pub fn family_jitter(&self) -> Option<(FamilyVariant, f64)> {
        match &self.map {
            Map::Family(f) => Some((f.variant, f.jitter)),
            _ => None,
        }
    }

    /// Upper bound on `|∂²G_r/∂z∂z|` (operator norm) near `z`, used to scale
    /// finite-difference tolerances.
    pub fn curvature_bound(&self, z: &LatentPoint) -> f64 {
        match &self.map {
            Map::Linear(_) => 0.0,
            Map::Saddle => 2.0,
            Map::Polynomial(c) => {
                let x = z.as_slice()[0].abs() + 1.0;
                c.iter().enumerate().skip(2).map(|(k, ck)| ck.abs() * (k * (k - 1)) as f64 * x.powi(k as i32 - 2)).sum()
            }
            Map::Sphere => 3.0 / (z.norm() * 0.5).powi(2),
            Map::RandomFeature { inner, outer } => {
                let a = inner.norm();
                0.77 * outer.abs().column_sum().amax().max(outer.abs().row_sum().amax()) * a * a
            }
            Map::Family(f) => f.knob,
            Map::Curl { omega } => {
                let r = z.norm() + 1.0;
                2.0 * omega.abs() * (2.0 + omega.abs() * r) * (1.0 + r)
            }
        }
    }

    fn forward(&self, z: &[f64]) -> Vec<f64> {
        match &self.map {
            Map::Linear(m) => (m * DVector::from_column_slice(z)).as_slice().to_vec(),
            Map::Saddle => vec![z[0] * z[0], z[1]],
            Map::Polynomial(c) => vec![c.iter().rev().fold(0.0, |acc, ck| acc * z[0] + ck)],
            Map::Sphere => {
                let n = norm(z);
                z.iter().map(|v| v / n).collect()
            }
            Map::RandomFeature { inner, outer } => {
                let hidden = (inner * DVector::from_column_slice(z)).map(f64::tanh);
                (outer * hidden).as_slice().to_vec()
            }
            Map::Family(f) => {
                let g = FAMILY_PRINCIPAL_SCALE * z[0] + 0.5 * f.knob * z[1..].iter().map(|v| v * v).sum::<f64>();
                let mut out: Vec<f64> = f.principal_pattern.iter().map(|p| g * p).collect();
                for ((pattern, s), zi) in f.rest_patterns.iter().zip(&f.rest_scales).zip(&z[1..]) {
                    for (o, p) in out.iter_mut().zip(pattern) {
                        *o += s * zi * p;
                    }
                }
                out
            }
            Map::Curl { omega } => {
                let (s, c) = (omega * norm(z)).sin_cos();
                let mut out = z.to_vec();
                for pair in out.chunks_exact_mut(2) {
                    let (x, y) = (pair[0], pair[1]);
                    pair[0] = c * x - s * y;
                    pair[1] = s * x + c * y;
                }
                out
            }
        }
    }
}

impl Generator for Builtin {
    fn descriptor(&self) -> &GeneratorDescriptor {
        &self.descriptor
    }

    fn evaluate(&self, z: &LatentPoint) -> Result<ImageTensor, GeneratorError> {
        self.descriptor.check_latent(z)?;
        finish_output(self.descriptor.output_shape, self.forward(z.as_slice()))
    }
}

impl AnalyticJacobian for Builtin {
    fn analytic_jacobian(&self, z: &LatentPoint) -> Result<DMatrix<f64>, GeneratorError> {
        self.descriptor.check_latent(z)?;
        let z = z.as_slice();
        let e = z.len();
        let jac = match &self.map {
            Map::Linear(m) => m.clone(),
            Map::Saddle => DMatrix::from_row_slice(2, 2, &[2.0 * z[0], 0.0, 0.0, 1.0]),
            Map::Polynomial(c) => {
                let d = c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, ck)| acc * z[0] + k as f64 * ck);
                // Horner over k·c_k; the fold above accumulates from the top degree down
                DMatrix::from_element(1, 1, d)
            }
            Map::Sphere => {
                let n = norm(z);
                let u = DVector::from_column_slice(z) / n;
                (DMatrix::identity(e, e) - &u * u.transpose()) / n
            }
            Map::RandomFeature { inner, outer } => {
                let pre = inner * DVector::from_column_slice(z);
                let slope = pre.map(|v| 1.0 - v.tanh().powi(2));
                outer * DMatrix::from_diagonal(&slope) * inner
            }
            Map::Family(f) => {
                let d = self.descriptor.output_len();
                let mut jac = DMatrix::zeros(d, e);
                let mut grad = vec![FAMILY_PRINCIPAL_SCALE];
                grad.extend(z[1..].iter().map(|v| f.knob * v));
                for (col, g) in grad.iter().enumerate() {
                    for (r, p) in f.principal_pattern.iter().enumerate() {
                        jac[(r, col)] += g * p;
                    }
                }
                for (i, (pattern, s)) in f.rest_patterns.iter().zip(&f.rest_scales).enumerate() {
                    for (r, p) in pattern.iter().enumerate() {
                        jac[(r, i + 1)] += s * p;
                    }
                }
                jac
            }
            Map::Curl { omega } => {
                let r = norm(z);
                let (s, c) = (omega * r).sin_cos();
                let mut jac = DMatrix::identity(e, e);
                // dθ/dz = ω z / ‖z‖
                let dtheta: Vec<f64> = if r > 0.0 { z.iter().map(|v| omega * v / r).collect() } else { vec![0.0; e] };
                for p in 0..e / 2 {
                    let (i, k) = (2 * p, 2 * p + 1);
                    let (x, y) = (z[i], z[k]);
                    jac[(i, i)] = c;
                    jac[(i, k)] = -s;
                    jac[(k, i)] = s;
                    jac[(k, k)] = c;
                    // d(R(θ)v)/dθ = (−s x − c y, c x − s y)
                    let (dx, dy) = (-s * x - c * y, c * x - s * y);
                    for (col, dt) in dtheta.iter().enumerate() {
                        jac[(i, col)] += dx * dt;
                        jac[(k, col)] += dy * dt;
                    }
                }
                jac
            }
        };
        Ok(jac)
    }
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `(seed · α) mod 1` for an irrational `α` picked by `stream`.
fn weyl(seed: u64, stream: u64) -> f64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    const SQRT2: u64 = 0x6a09_e667_f3bc_c909;
    let step = if stream == stream::FAMILY_KNOB { GOLDEN } else { SQRT2 };
    let offset = seeding::derive_seed(0, stream);
    (seed.wrapping_mul(step).wrapping_add(offset) >> 11) as f64 / (1u64 << 53) as f64
}

fn log_uniform(u: f64, (lo, hi): (f64, f64)) -> f64 {
    lo * (hi / lo).powf(u)
}

/// Orthonormal 16×16 Walsh pattern `(−1)^{popcount(i&u) + popcount(j&v)} / 16`.
fn walsh(u: usize, v: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(FAMILY_SIDE * FAMILY_SIDE);
    for i in 0..FAMILY_SIDE {
        for j in 0..FAMILY_SIDE {
            let parity = ((i & u).count_ones() + (j & v).count_ones()) % 2;
            out.push(if parity == 0 { 1.0 } else { -1.0 } / FAMILY_SIDE as f64);
        }
    }
    out
}

/// Blocky low-sequency patterns (constant on 4×4 tiles), coarsest first.
fn rest_pattern_indices() -> [(usize, usize); 15] {
    [
        (8, 0), (0, 8), (8, 8), (4, 0), (0, 4), (4, 8), (8, 4), (4, 4),
        (12, 0), (0, 12), (12, 8), (8, 12), (12, 4), (4, 12), (12, 12),
    ]
}

/// Builds a built-in generator. `seed` selects the family member for the
/// coupled/decoupled families and is ignored by every other kind.
pub fn make_builtin(kind: BuiltinKind, params: &BuiltinParams, seed: u64) -> Result<Builtin, GeneratorError> {
    let shape_param = params.output_shape.map(|[c, h, w]| Shape::new(c, h, w));
    match kind {
        BuiltinKind::Linear => {
            if let Some(rows) = &params.matrix {
                let ncols = rows.first().map_or(0, Vec::len);
                if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
                    return Err(invalid("linear matrix must be a non-empty rectangular list of rows"));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                let m = DMatrix::from_row_slice(rows.len(), ncols, &flat);
                Builtin::linear(m, shape_param.unwrap_or(Shape::flat(rows.len())))
            } else if let Some(scales) = &params.scales {
                let m = DMatrix::from_diagonal(&DVector::from_column_slice(scales));
                Builtin::linear(m, shape_param.unwrap_or(Shape::flat(scales.len())))
            } else {
                let e = params.latent_dim.unwrap_or(2);
                Builtin::linear(DMatrix::identity(e, e), shape_param.unwrap_or(Shape::flat(e)))
            }
        }
        BuiltinKind::Saddle => Ok(Builtin::saddle()),
        BuiltinKind::Polynomial => Builtin::polynomial_1d(params.coefficients.clone().unwrap_or_else(|| vec![0.0, 0.0, 1.0])),
        BuiltinKind::Sphere => Builtin::sphere(params.latent_dim.unwrap_or(3)),
        BuiltinKind::RandomFeature => Builtin::random_feature(
            params.latent_dim.unwrap_or(8),
            params.hidden.unwrap_or(32),
            shape_param.unwrap_or(Shape::new(1, 8, 8)),
            params.weights_seed.unwrap_or(0),
        ),
        BuiltinKind::CoupledFamily => Builtin::family(FamilyVariant::Coupled, params.latent_dim.unwrap_or(16), seed),
        BuiltinKind::DecoupledFamily => Builtin::family(FamilyVariant::Decoupled, params.latent_dim.unwrap_or(16), seed),
        BuiltinKind::CurlSampler => Builtin::curl(params.latent_dim.unwrap_or(4), params.omega.unwrap_or(1.0)),
        BuiltinKind::ContractionSampler => Builtin::contraction(params.latent_dim.unwrap_or(4), params.factor.unwrap_or(0.5)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(v: &[f64]) -> LatentPoint {
        LatentPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let g = Builtin::linear(DMatrix::identity(2, 2) * 2.0, Shape::flat(2)).unwrap();
        assert_eq!(g.evaluate(&lp(&[1.0, 1.0])).unwrap().data(), &[2.0, 2.0]);
        assert_eq!(Builtin::saddle().evaluate(&lp(&[3.0, 5.0])).unwrap().data(), &[9.0, 5.0]);
        let rf = Builtin::random_feature(4, 6, Shape::new(1, 2, 3), 9).unwrap();
        let z = LatentPoint::gaussian(1, 4);
        assert_eq!(rf.evaluate(&z).unwrap(), rf.evaluate(&z).unwrap());
    }

    #[test]
    fn jacobian_examples() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let g = Builtin::linear(m.clone(), Shape::flat(3)).unwrap();
        assert_eq!(g.analytic_jacobian(&lp(&[7.0, -1.0])).unwrap(), m);
        assert_eq!(
            Builtin::saddle().analytic_jacobian(&lp(&[2.0, 0.0])).unwrap(),
            DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0])
        );
        let rf = Builtin::random_feature(3, 5, Shape::flat(4), 2).unwrap();
        let Map::RandomFeature { inner, outer } = &rf.map else { unreachable!() };
        let at_zero = rf.analytic_jacobian(&lp(&[0.0, 0.0, 0.0])).unwrap();
        assert!((at_zero - outer * inner).amax() < 1e-15);
        let p = Builtin::polynomial_1d(vec![1.0, -2.0, 0.5, 1.0]).unwrap();
        // d/dz (1 - 2z + z²/2 + z³) = -2 + z + 3z²
        assert!((p.analytic_jacobian(&lp(&[2.0])).unwrap()[(0, 0)] - 12.0).abs() < 1e-12);
        assert_eq!(p.evaluate(&lp(&[2.0])).unwrap().data(), &[7.0]);
    }

    #[test]
    fn identity_builtin_is_identity() {
        let g = make_builtin(BuiltinKind::Linear, &BuiltinParams { latent_dim: Some(3), ..Default::default() }, 0).unwrap();
        let z = lp(&[0.5, -2.0, 3.0]);
        assert_eq!(g.evaluate(&z).unwrap().data(), z.as_slice());
    }

    #[test]
    fn walsh_patterns_are_orthonormal() {
        let mut all = vec![walsh(0, 0), walsh(1, 1)];
        all.extend(rest_pattern_indices().iter().map(|&(u, v)| walsh(u, v)));
        for (a, pa) in all.iter().enumerate() {
            for (b, pb) in all.iter().enumerate() {
                let dot: f64 = pa.iter().zip(pb).map(|(x, y)| x * y).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-14, "({a},{b}) -> {dot}");
            }
        }
    }

    #[test]
    fn family_members_are_seed_deterministic() {
        let a = make_builtin(BuiltinKind::CoupledFamily, &BuiltinParams::default(), 12).unwrap();
        let b = make_builtin(BuiltinKind::CoupledFamily, &BuiltinParams::default(), 12).unwrap();
        assert_eq!(a, b);
        let d = make_builtin(BuiltinKind::DecoupledFamily, &BuiltinParams::default(), 12).unwrap();
        assert_eq!(a.family_knob(), d.family_knob());
        let k = a.family_knob().unwrap();
        assert!((FAMILY_KNOB_RANGE.0..=FAMILY_KNOB_RANGE.1).contains(&k));
        assert!(Builtin::family(FamilyVariant::Coupled, 17, 0).is_err());
    }

    #[test]
    fn curl_preserves_norm() {
        let g = Builtin::curl(5, 0.7).unwrap();
        let z = LatentPoint::gaussian(4, 5);
        let h = g.evaluate(&z).unwrap();
        let n: f64 = h.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - z.norm()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        let bad = BuiltinParams { matrix: Some(vec![vec![1.0, 2.0], vec![3.0]]), ..Default::default() };
        assert!(make_builtin(BuiltinKind::Linear, &bad, 0).is_err());
        assert!(Builtin::sphere(2).unwrap().evaluate(&lp(&[0.0, 0.0])).is_err());
        assert!(matches!(
            Builtin::saddle().evaluate(&lp(&[1.0, 2.0, 3.0])),
            Err(GeneratorError::Dimension { expected: 2, got: 3 })
        ));
    }
}
