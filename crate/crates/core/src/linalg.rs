//! Dense vector helpers on `f64` slices.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y <- y + alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, y: &mut [f64]) {
    for yi in y.iter_mut() {
        *yi *= alpha;
    }
}

/// Squared Euclidean distance between the stacked parameters `(w_a, rho_a)` and `(w_b, rho_b)`.
pub fn param_dist_sq(w_a: &[f64], rho_a: f64, w_b: &[f64], rho_b: f64) -> f64 {
    let dw: f64 = w_a.iter().zip(w_b).map(|(a, b)| (a - b) * (a - b)).sum();
    dw + (rho_a - rho_b) * (rho_a - rho_b)
}
