use crate::kernel_features::FeatureVector;
use crate::linalg;

/// Largest point count for which the full Gram matrix is cached.
const CACHE_LIMIT: usize = 4096;

/// Inner products between the support points, cached when small enough.
pub(crate) struct Gram<'a> {
    points: &'a [FeatureVector],
    cache: Option<Vec<f64>>,
}

impl<'a> Gram<'a> {
    pub(crate) fn new(points: &'a [FeatureVector]) -> Self {
        let n = points.len();
        let cache = (n <= CACHE_LIMIT).then(|| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = points[i].dot(&points[j]);
                    m[i * n + j] = v;
                    m[j * n + i] = v;
                }
            }
            m
        });
        Gram { points, cache }
    }

    /// Adds `alpha * (<x_k, x_i> - <x_k, x_j>)` to `out[k]` for every `k`.
    pub(crate) fn add_difference_column(&self, alpha: f64, i: usize, j: usize, out: &mut [f64]) {
        let n = self.points.len();
        match &self.cache {
            Some(m) => {
                let (ci, cj) = (&m[i * n..(i + 1) * n], &m[j * n..(j + 1) * n]);
                for k in 0..n {
                    out[k] += alpha * (ci[k] - cj[k]);
                }
            }
            None => {
                let diff: Vec<f64> = self.points[i]
                    .as_slice()
                    .iter()
                    .zip(self.points[j].as_slice())
                    .map(|(a, b)| a - b)
                    .collect();
                for (k, o) in out.iter_mut().enumerate() {
                    *o += alpha * linalg::dot(&diff, self.points[k].as_slice());
                }
            }
        }
    }

    pub(crate) fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.cache {
            Some(m) => m[i * self.points.len() + j],
            None => self.points[i].dot(&self.points[j]),
        }
    }
}
