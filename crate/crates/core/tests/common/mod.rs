#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sonar::oracle::EmpiricalMeasure;
use sonar::FeatureVector;

pub fn gaussian(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn unit(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    let g = gaussian(dim, rng);
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    g.into_iter().map(|v| v / n).collect()
}

/// `n` unit vectors within angle `half_angle` of a random pole (at most a
/// hemisphere), uniformly weighted.
pub fn cap_measure(n: usize, dim: usize, half_angle: f64, seed: u64) -> EmpiricalMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pole = unit(dim, &mut rng);
    let min_cos = half_angle.cos();
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let mut x = unit(dim, &mut rng);
        let c: f64 = x.iter().zip(&pole).map(|(a, b)| a * b).sum();
        if c < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        if c.abs() >= min_cos && c != 0.0 {
            points.push(FeatureVector::normalized(x).unwrap());
        }
    }
    EmpiricalMeasure::uniform(points).unwrap()
}

/// Unit vectors in arbitrary directions with random positive weights.
pub fn sphere_measure(n: usize, dim: usize, seed: u64) -> EmpiricalMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| FeatureVector::normalized(gaussian(dim, &mut rng)).unwrap())
        .collect();
    let weights = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    EmpiricalMeasure::weighted(points, weights).unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Scores within this distance of the offset count as ties, not violations.
/// A duality gap of 1e-15 bounds the parameter error by about 5e-8.
pub const TIE_BAND: f64 = 1e-7;

/// Weighted fraction of points with `<w, x> < rho - TIE_BAND`.
pub fn violation_fraction(m: &EmpiricalMeasure, w: &[f64], rho: f64) -> f64 {
    m.strict_violation_fraction(w, rho - TIE_BAND)
}
