//! The soft-margin OCSVM in penalty form,
//! `|w|^2/2 - rho + (1/lambda) E[(rho - <w, X>)_+]`.

use super::gram::Gram;
use super::{margin_of, EmpiricalMeasure, Solution};
use crate::error::{Error, Result};
use crate::linalg;

fn check_lambda_open(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::config(format!(
            "soft OCSVM needs lambda in (0, 1], got {lambda}"
        )));
    }
    Ok(())
}

pub fn eval_soft_ocsvm(w: &[f64], rho: f64, measure: &EmpiricalMeasure, lambda: f64) -> Result<f64> {
    check_lambda_open(lambda)?;
    measure.check_dim(w)?;
    Ok(soft_value(w, rho, measure, lambda))
}

fn soft_value(w: &[f64], rho: f64, measure: &EmpiricalMeasure, lambda: f64) -> f64 {
    0.5 * linalg::norm_sq(w) - rho + measure.expected_hinge(w, rho) / lambda
}

/// Solves the soft OCSVM through its dual
///
/// ```text
/// min |sum_i b_i x_i|^2 / 2   s.t.  sum_i b_i = 1,  0 <= b_i <= p_i / lambda
/// ```
///
/// using maximal-violating-pair updates (each step moves mass between two
/// coordinates with an exact line search). `tol` bounds the KKT violation
/// `max_{b_j > 0} <w,x_j> - min_{b_i < cap_i} <w,x_i>`; `max_iters` counts
/// pair updates.
///
/// The offset is not unique in general. Among the optimal offsets for the
/// final `w` the smallest is returned, i.e. the smallest score `s` with
/// `P(<w,X> <= s) >= lambda`, so that `P(<w,X> < rho) < lambda`.
pub fn minimize_soft_ocsvm(measure: &EmpiricalMeasure, lambda: f64, max_iters: usize, tol: f64) -> Result<Solution> {
    check_lambda_open(lambda)?;
    let n = measure.len();
    let points = measure.points();
    let caps: Vec<f64> = measure.weights().iter().map(|p| p / lambda).collect();

    // Feasible start: fill coordinates in order until the unit budget is spent.
    let mut beta = vec![0.0; n];
    let mut remaining = 1.0;
    for (b, cap) in beta.iter_mut().zip(&caps) {
        let take = cap.min(remaining);
        *b = take;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }

    let gram = Gram::new(points);
    let mut w = vec![0.0; measure.dim()];
    for (b, x) in beta.iter().zip(points) {
        linalg::axpy(*b, x.as_slice(), &mut w);
    }
    let mut scores: Vec<f64> = points.iter().map(|x| linalg::dot(&w, x.as_slice())).collect();

    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    while iterations < max_iters {
        let mut up: Option<usize> = None;
        let mut down: Option<usize> = None;
        for k in 0..n {
            if beta[k] < caps[k] && up.is_none_or(|i| scores[k] < scores[i]) {
                up = Some(k);
            }
            if beta[k] > 0.0 && down.is_none_or(|j| scores[k] > scores[j]) {
                down = Some(k);
            }
        }
        let (Some(i), Some(j)) = (up, down) else {
            violation = 0.0;
            break;
        };
        violation = (scores[j] - scores[i]).max(0.0);
        if violation <= tol {
            break;
        }
        iterations += 1;
        let curvature = gram.entry(i, i) + gram.entry(j, j) - 2.0 * gram.entry(i, j);
        let room = (caps[i] - beta[i]).min(beta[j]);
        let step = if curvature > 1e-15 {
            (violation / curvature).min(room)
        } else {
            room
        };
        beta[i] += step;
        beta[j] -= step;
        if beta[j] < 1e-18 {
            beta[j] = 0.0;
        }
        linalg::axpy(step, points[i].as_slice(), &mut w);
        linalg::axpy(-step, points[j].as_slice(), &mut w);
        gram.add_difference_column(step, i, j, &mut scores);
    }

    // Fresh scores for the offset selection.
    let mut order: Vec<(f64, f64)> = points
        .iter()
        .zip(measure.weights())
        .map(|(x, p)| (linalg::dot(&w, x.as_slice()), *p))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cumulative = 0.0;
    let mut rho = order.last().map(|o| o.0).unwrap_or(0.0);
    for (s, p) in &order {
        cumulative += p;
        if cumulative >= lambda - 1e-12 {
            rho = *s;
            break;
        }
    }

    let objective_value = soft_value(&w, rho, measure, lambda);
    let gap = (objective_value + 0.5 * linalg::norm_sq(&w)).max(0.0);
    Ok(Solution {
        margin: margin_of(&w, rho),
        objective_value,
        w,
        rho,
        gap,
        iterations,
        converged: violation <= tol,
    })
}
