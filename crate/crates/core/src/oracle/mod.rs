//! Exact evaluation and desk-scale minimization of the one-class objectives
//! on empirical measures.
//!
//! An empirical measure is a legitimate data distribution, so every
//! population-level statement about the minimizers (Type I error below
//! `lambda`, margin at least the support margin, ...) can be checked exactly
//! on it. These solvers are the reference the online learners are compared to.

mod gram;
mod hull;
mod probe;
mod regularized;
mod soft;

pub use hull::{support_margin, support_margin_with, SupportMargin};
pub use probe::{strong_convexity_probe, ProbeConfig, ProbeDirection, ProbeObjective};
pub use regularized::{eval_f, minimize_f, subgradient_f};
pub use soft::{eval_soft_ocsvm, minimize_soft_ocsvm};

use crate::error::{Error, Result};
use crate::kernel_features::FeatureVector;
use crate::linalg;

/// A finitely supported probability measure on the unit sphere.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    points: Vec<FeatureVector>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Uniform weights over `points`.
    pub fn uniform(points: Vec<FeatureVector>) -> Result<Self> {
        let n = points.len();
        Self::weighted(points, vec![1.0 / n.max(1) as f64; n])
    }

    /// Arbitrary nonnegative weights, renormalized to sum to one.
    pub fn weighted(points: Vec<FeatureVector>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("empirical measure needs at least one point"));
        }
        if weights.len() != points.len() {
            return Err(Error::input("one weight per point is required"));
        }
        let dim = points[0].dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::input("all points must share one dimension"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::input("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::input("weights must not all be zero"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(EmpiricalMeasure { points, weights })
    }

    pub fn points(&self) -> &[FeatureVector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// Weighted mass of points with `<w, x> < rho` (ties are not violations).
    pub fn strict_violation_fraction(&self, w: &[f64], rho: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(x, _)| linalg::dot(w, x.as_slice()) < rho)
            .map(|(_, p)| p)
            .sum()
    }

    /// `E[(rho - <w, X>)_+]`
    pub fn expected_hinge(&self, w: &[f64], rho: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, p)| p * (rho - linalg::dot(w, x.as_slice())).max(0.0))
            .sum()
    }

    pub(crate) fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::input(format!(
                "parameter dimension {} does not match measure dimension {}",
                w.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// A minimizer returned by the batch solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub w: Vec<f64>,
    pub rho: f64,
    pub objective_value: f64,
    /// `rho / |w|`, absent when `w` vanishes.
    pub margin: Option<f64>,
    /// Certified duality gap at termination.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn margin_of(w: &[f64], rho: f64) -> Option<f64> {
    let n = linalg::norm(w);
    (n > 1e-12).then(|| rho / n)
}

/// `(lambda/2)|w|^2 - lambda rho + E[(rho - <w, X>)_+]`, the plain
/// RFF-linearized OCSVM risk used by the SGD baseline.
pub fn eval_erm_ocsvm(w: &[f64], rho: f64, measure: &EmpiricalMeasure, lambda: f64) -> Result<f64> {
    check_lambda_closed(lambda)?;
    measure.check_dim(w)?;
    Ok(0.5 * lambda * linalg::norm_sq(w) - lambda * rho + measure.expected_hinge(w, rho))
}

pub(crate) fn check_lambda_closed(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(())
}
