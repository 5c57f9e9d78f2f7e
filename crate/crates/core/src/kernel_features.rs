//! Random Fourier features for the RBF kernel `exp(-gamma * |x - y|^2)`.
//!
//! Each of the `d` frequency vectors produces a `(sin, cos)` pair, and the
//! whole vector is scaled by `1/sqrt(d)`. The embedding therefore has exactly
//! unit Euclidean norm and
//!
//! ```text
//! z(x) . z(y) = (1/d) * sum_j cos(omega_j . (x - y))
//! ```
//!
//! which is an unbiased estimate of the kernel when `omega_j ~ N(0, 2 gamma I)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on `| |z| - 1 |` accepted by [`FeatureVector::new`].
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Parameters of a random feature map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RffConfig {
    /// RBF bandwidth.
    pub gamma: f64,
    /// Number of `(sin, cos)` pairs; the embedding has `2 * num_pairs` coordinates.
    pub num_pairs: usize,
    /// Dimension of the raw inputs.
    pub input_dim: usize,
    pub seed: u64,
}

impl RffConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.num_pairs == 0 {
            return Err(Error::config("num_pairs must be >= 1"));
        }
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be >= 1"));
        }
        Ok(())
    }

    /// Dimension of the embedded vectors.
    pub fn feature_dim(&self) -> usize {
        2 * self.num_pairs
    }
}

/// A frozen random projection. Immutable once sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct RffMap {
    config: RffConfig,
    /// Row-major `num_pairs x input_dim`.
    omegas: Vec<f64>,
}

/// An embedded point on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    /// Wraps `values`, rejecting vectors whose norm is not 1 within [`UNIT_NORM_TOL`].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = linalg::norm(&values);
        if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::input(format!("feature vector must have unit norm, got {n}")));
        }
        Ok(FeatureVector(values))
    }

    /// Normalizes a nonzero vector onto the sphere.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self> {
        let n = linalg::norm(&values);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::input("cannot normalize a zero or non-finite vector"));
        }
        linalg::scale(1.0 / n, &mut values);
        Ok(FeatureVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        linalg::dot(&self.0, &other.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Draws `omega_j ~ N(0, 2 gamma I)` for `j = 1..=num_pairs`, deterministically from `config.seed`.
pub fn sample_rff(config: RffConfig) -> Result<RffMap> {
    config.validate()?;
    let normal = Normal::new(0.0, (2.0 * config.gamma).sqrt())
        .map_err(|e| Error::config(format!("bad frequency distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let omegas = (0..config.num_pairs * config.input_dim)
        .map(|_| normal.sample(&mut rng))
        .collect();
    Ok(RffMap { config, omegas })
}

impl RffMap {
    pub fn config(&self) -> &RffConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim()
    }

    /// Frequency vector `j`.
    pub fn omega(&self, j: usize) -> &[f64] {
        let d = self.config.input_dim;
        &self.omegas[j * d..(j + 1) * d]
    }

    /// Embeds a raw point.
    pub fn embed(&self, x: &[f64]) -> Result<FeatureVector> {
        if x.len() != self.config.input_dim {
            return Err(Error::input(format!(
                "expected input of dimension {}, got {}",
                self.config.input_dim,
                x.len()
            )));
        }
        let scale = (1.0 / self.config.num_pairs as f64).sqrt();
        let mut values = Vec::with_capacity(self.feature_dim());
        for j in 0..self.config.num_pairs {
            let (s, c) = linalg::dot(self.omega(j), x).sin_cos();
            values.push(scale * s);
            values.push(scale * c);
        }
        Ok(FeatureVector(values))
    }
}

/// The exact RBF kernel value.
pub fn kernel_exact(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::input(format!(
            "kernel arguments differ in dimension ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let dist_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * dist_sq).exp())
}

/// Number of feature pairs needed so the approximate kernel is within
/// `r_min / 2` of the exact one uniformly, with probability `1 - delta`:
/// `ceil(c * (D / r_min^2) * ln(D / (delta * r_min^2)))`, at least 1.
pub fn recommended_feature_count(input_dim: usize, r_min: f64, delta: f64, c: f64) -> Result<usize> {
    if input_dim == 0 {
        return Err(Error::config("input_dim must be >= 1"));
    }
    if !(r_min > 0.0 && r_min < 1.0) {
        return Err(Error::config(format!("r_min must lie in (0, 1), got {r_min}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::config(format!("feature-count constant must be > 0, got {c}")));
    }
    let dim = input_dim as f64;
    let base = dim / (r_min * r_min);
    let count = (c * base * (base / delta).ln()).ceil();
    Ok(count.max(1.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cfg(gamma: f64, num_pairs: usize, input_dim: usize, seed: u64) -> RffConfig {
        RffConfig {
            gamma,
            num_pairs,
            input_dim,
            seed,
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_rff(cfg(0.5, 1, 2, 7)).unwrap();
        let b = sample_rff(cfg(0.5, 1, 2, 7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.omega(0).len(), 2);
        let c = sample_rff(cfg(0.5, 1, 2, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn frequency_covariance_is_two_gamma_identity() {
        let map = sample_rff(cfg(0.5, 100_000, 2, 11)).unwrap();
        let n = 100_000.0;
        let mut cov = [[0.0; 2]; 2];
        for j in 0..100_000 {
            let w = map.omega(j);
            for a in 0..2 {
                for b in 0..2 {
                    cov[a][b] += w[a] * w[b] / n;
                }
            }
        }
        for (a, row) in cov.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 0.05, "cov[{a}][{b}] = {v}");
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(matches!(sample_rff(cfg(0.0, 1, 2, 0)), Err(Error::Config(_))));
        assert!(matches!(sample_rff(cfg(-1.0, 1, 2, 0)), Err(Error::Config(_))));
        assert!(matches!(sample_rff(cfg(0.5, 0, 2, 0)), Err(Error::Config(_))));
        assert!(matches!(sample_rff(cfg(0.5, 1, 0, 0)), Err(Error::Config(_))));
    }

    #[test]
    fn embedding_has_unit_norm_and_self_product_one() {
        let map = sample_rff(cfg(0.5, 60, 3, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
            let z = map.embed(&x).unwrap();
            assert_eq!(z.dim(), 120);
            assert!((linalg::norm(z.as_slice()) - 1.0).abs() < 1e-9);
            assert!((z.dot(&z) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn embedding_inner_product_matches_cosine_sum() {
        let map = sample_rff(cfg(0.7, 25, 2, 3)).unwrap();
        let x = [0.3, -1.2];
        let y = [1.1, 0.4];
        let direct: f64 = (0..25)
            .map(|j| {
                let w = map.omega(j);
                (w[0] * (x[0] - y[0]) + w[1] * (x[1] - y[1])).cos()
            })
            .sum::<f64>()
            / 25.0;
        let zx = map.embed(&x).unwrap();
        let zy = map.embed(&y).unwrap();
        assert!((zx.dot(&zy) - direct).abs() < 1e-12);
    }

    #[test]
    fn embed_rejects_wrong_dimension() {
        let map = sample_rff(cfg(0.5, 4, 2, 0)).unwrap();
        assert!(matches!(map.embed(&[1.0]), Err(Error::Input(_))));
    }

    #[test]
    fn feature_vector_rejects_non_unit_input() {
        assert!(FeatureVector::new(vec![2.0, 0.0]).is_err());
        assert!(FeatureVector::new(vec![0.6, 0.8]).is_ok());
        assert!(FeatureVector::normalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn exact_kernel_values() {
        assert_eq!(kernel_exact(&[1.0, 2.0], &[1.0, 2.0], 0.5).unwrap(), 1.0);
        let k = kernel_exact(&[0.0, 0.0], &[1.0, 0.0], 0.5).unwrap();
        assert!((k - (-0.5f64).exp()).abs() < 1e-15);
        assert!((k - 0.6065).abs() < 1e-4);
        assert!(kernel_exact(&[0.0], &[1.0], 1e4).unwrap() < 1e-300);
        assert!(kernel_exact(&[0.0], &[1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn feature_count_formula() {
        // 8 * ln(1600) = 59.02...
        assert_eq!(recommended_feature_count(2, 0.5, 0.005, 1.0).unwrap(), 60);
        let base = recommended_feature_count(2, 0.5, 0.005, 1.0).unwrap();
        let halved = recommended_feature_count(2, 0.25, 0.005, 1.0).unwrap();
        assert!(halved > 4 * base);
        assert!(recommended_feature_count(2, 0.5, 1.0, 1.0).is_err());
        assert!(recommended_feature_count(2, 0.0, 0.1, 1.0).is_err());
        assert!(recommended_feature_count(0, 0.5, 0.1, 1.0).is_err());
    }

    #[test]
    fn feature_count_monotonicity() {
        let mut prev = usize::MAX;
        for r in [0.1, 0.2, 0.4, 0.6, 0.8, 0.95] {
            let d = recommended_feature_count(3, r, 0.01, 1.0).unwrap();
            assert!(d <= prev);
            prev = d;
        }
        let mut prev = usize::MAX;
        for delta in [0.001, 0.01, 0.1, 0.5, 0.9] {
            let d = recommended_feature_count(3, 0.5, delta, 1.0).unwrap();
            assert!(d <= prev);
            prev = d;
        }
        let mut prev = 0;
        for dim in 1..10 {
            let d = recommended_feature_count(dim, 0.5, 0.01, 1.0).unwrap();
            assert!(d >= prev);
            prev = d;
        }
    }
}
