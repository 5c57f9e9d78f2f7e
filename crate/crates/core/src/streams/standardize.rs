use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-12;

/// Per-coordinate running mean and variance (Welford).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStandardizer {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    variance_floor: f64,
    /// Standardize with the estimates *before* folding in the current point.
    exclusive: bool,
}

impl RunningStandardizer {
    pub fn new(dim: usize) -> Self {
        RunningStandardizer {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            exclusive: false,
        }
    }

    pub fn with_variance_floor(mut self, floor: f64) -> Self {
        self.variance_floor = floor;
        self
    }

    pub fn exclusive(mut self, exclusive: bool) -> Self {
        self.exclusive = exclusive;
        self
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance `M2 / n` (zero before any data).
    pub fn variance(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.m2.iter().map(|m| m / n).collect()
    }

    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        self.check(x)?;
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *mean;
            *mean += delta / n;
            *m2 += delta * (v - *mean);
        }
        Ok(())
    }

    fn transform(&self, x: &[f64]) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; x.len()];
        }
        let n = self.count as f64;
        x.iter()
            .zip(&self.mean)
            .zip(&self.m2)
            .map(|((v, mean), m2)| (v - mean) / (m2 / n).max(self.variance_floor).sqrt())
            .collect()
    }

    /// Folds `x` into the running estimates and returns it standardized.
    /// By default the estimates include `x` itself, so the first point maps to zero.
    pub fn standardize(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        if self.exclusive {
            self.check(x)?;
            let out = self.transform(x);
            self.update(x)?;
            Ok(out)
        } else {
            self.update(x)?;
            Ok(self.transform(x))
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.mean.len() {
            return Err(Error::input(format!(
                "standardizer expects dimension {}, got {}",
                self.mean.len(),
                x.len()
            )));
        }
        Ok(())
    }
}
