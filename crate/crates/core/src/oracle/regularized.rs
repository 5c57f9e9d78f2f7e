//! The 1-strongly convex objective
//! `F(w, rho) = (|w|^2 + rho^2)/2 - lambda rho + E[(rho - <w, X>)_+]`.

use super::{check_lambda_closed, margin_of, EmpiricalMeasure, Solution};
use crate::error::Result;
use crate::linalg;

pub fn eval_f(w: &[f64], rho: f64, measure: &EmpiricalMeasure, lambda: f64) -> Result<f64> {
    check_lambda_closed(lambda)?;
    measure.check_dim(w)?;
    Ok(f_value(w, rho, measure, lambda))
}

fn f_value(w: &[f64], rho: f64, measure: &EmpiricalMeasure, lambda: f64) -> f64 {
    0.5 * (linalg::norm_sq(w) + rho * rho) - lambda * rho + measure.expected_hinge(w, rho)
}

/// `(w - E[X 1{rho >= <w,X>}], rho - lambda + P(rho >= <w,X>))`
pub fn subgradient_f(w: &[f64], rho: f64, measure: &EmpiricalMeasure, lambda: f64) -> Result<(Vec<f64>, f64)> {
    check_lambda_closed(lambda)?;
    measure.check_dim(w)?;
    let mut g_w = w.to_vec();
    let mut active = 0.0;
    for (x, p) in measure.points().iter().zip(measure.weights()) {
        if rho >= linalg::dot(w, x.as_slice()) {
            linalg::axpy(-p, x.as_slice(), &mut g_w);
            active += p;
        }
    }
    Ok((g_w, rho - lambda + active))
}

/// Minimizes `F` exactly by coordinate descent on its dual.
///
/// Writing the hinge as `max_{a in [0,1]} a (rho - <w,x>)` and eliminating
/// `(w, rho)` gives the box-constrained quadratic
///
/// ```text
/// min_{0 <= b_i <= p_i}  |sum_i b_i x_i|^2 / 2 + (lambda - sum_i b_i)^2 / 2
/// ```
///
/// with `w = sum_i b_i x_i` and `rho = lambda - sum_i b_i`. Each sweep updates
/// every coordinate in order; iteration stops once the duality gap
/// `F(w, rho) + (|w|^2 + rho^2)/2` drops below `tol`. Strong convexity then
/// bounds the squared distance to the minimizer by `2 * gap`.
///
/// `max_iters` counts sweeps. Running out of sweeps is not an error: the
/// best iterate is returned with `converged = false`.
pub fn minimize_f(measure: &EmpiricalMeasure, lambda: f64, max_iters: usize, tol: f64) -> Result<Solution> {
    check_lambda_closed(lambda)?;
    let n = measure.len();
    let points = measure.points();
    let caps = measure.weights();
    let curvature: Vec<f64> = points.iter().map(|x| 1.0 + linalg::norm_sq(x.as_slice())).collect();

    let mut beta = vec![0.0; n];
    let mut w = vec![0.0; measure.dim()];
    let mut mass = 0.0;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        for i in 0..n {
            let x = points[i].as_slice();
            let rho = lambda - mass;
            let grad = linalg::dot(&w, x) - rho;
            let updated = (beta[i] - grad / curvature[i]).clamp(0.0, caps[i]);
            let delta = updated - beta[i];
            if delta != 0.0 {
                beta[i] = updated;
                linalg::axpy(delta, x, &mut w);
                mass += delta;
            }
        }
        // Recompute from scratch so rounding in the running sums cannot accumulate.
        mass = beta.iter().sum();
        w.iter_mut().for_each(|v| *v = 0.0);
        for (b, x) in beta.iter().zip(points) {
            if *b != 0.0 {
                linalg::axpy(*b, x.as_slice(), &mut w);
            }
        }
        gap = duality_gap(&w, lambda - mass, measure, lambda);
        if gap <= tol {
            break;
        }
    }

    let rho = lambda - mass;
    Ok(Solution {
        objective_value: f_value(&w, rho, measure, lambda),
        margin: margin_of(&w, rho),
        converged: gap <= tol,
        w,
        rho,
        gap,
        iterations,
    })
}

fn duality_gap(w: &[f64], rho: f64, measure: &EmpiricalMeasure, lambda: f64) -> f64 {
    let dual = -0.5 * (linalg::norm_sq(w) + rho * rho);
    (f_value(w, rho, measure, lambda) - dual).max(0.0)
}
