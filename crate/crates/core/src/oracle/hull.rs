//! Support margin `r* = sup_{|u|=1} min_x <x, u>`, computed as the distance
//! from the origin to the convex hull of the support.

use super::gram::Gram;
use super::EmpiricalMeasure;
use crate::linalg;

pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SupportMargin {
    /// Distance from the origin to the hull (`0` when the origin is inside).
    pub r_star: f64,
    /// Unit maximizing direction; empty when the origin lies in the hull.
    pub direction: Vec<f64>,
    /// Set when no strictly separating direction was found.
    pub origin_in_hull: bool,
    /// Certified lower bound `min_i <x_i, direction>` on the true value.
    pub lower_bound: f64,
    /// Frank-Wolfe duality gap at termination.
    pub gap: f64,
    pub iterations: usize,
}

pub fn support_margin(measure: &EmpiricalMeasure) -> SupportMargin {
    support_margin_with(measure, DEFAULT_MAX_ITERS, DEFAULT_GAP_TOL)
}

/// Pairwise Frank-Wolfe on `min |sum_i a_i x_i|^2 / 2` over the simplex.
///
/// The current hull point `p` gives an upper bound `|p|` on the distance and
/// the lower bound `min_i <x_i, p>/|p|`; the Frank-Wolfe gap
/// `|p|^2 - min_i <x_i, p>` controls their difference. The reported `r_star`
/// is the upper bound.
pub fn support_margin_with(measure: &EmpiricalMeasure, max_iters: usize, gap_tol: f64) -> SupportMargin {
    let points = measure.points();
    let n = points.len();
    let gram = Gram::new(points);

    let mut alpha = vec![0.0; n];
    alpha[0] = 1.0;
    let mut p = points[0].as_slice().to_vec();
    let mut scores: Vec<f64> = points.iter().map(|x| linalg::dot(&p, x.as_slice())).collect();

    let mut iterations = 0;
    let gap = loop {
        let (s, min_score) = argmin(&scores);
        let p_sq = linalg::norm_sq(&p);
        let gap = (p_sq - min_score).max(0.0);
        if gap <= gap_tol || iterations >= max_iters {
            break gap;
        }
        let away = (0..n)
            .filter(|&k| alpha[k] > 0.0)
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .expect("simplex weights always have support");
        if away == s {
            break gap;
        }
        iterations += 1;
        let curvature = gram.entry(s, s) + gram.entry(away, away) - 2.0 * gram.entry(s, away);
        if curvature <= 1e-18 {
            // Duplicate points: merge the weights.
            alpha[s] += alpha[away];
            alpha[away] = 0.0;
            continue;
        }
        let step = ((scores[away] - scores[s]) / curvature).min(alpha[away]);
        alpha[s] += step;
        alpha[away] -= step;
        if alpha[away] < 1e-18 {
            alpha[away] = 0.0;
        }
        linalg::axpy(step, points[s].as_slice(), &mut p);
        linalg::axpy(-step, points[away].as_slice(), &mut p);
        gram.add_difference_column(step, s, away, &mut scores);
        // Periodically refresh to keep the incremental scores exact.
        if iterations % 512 == 0 {
            scores = points.iter().map(|x| linalg::dot(&p, x.as_slice())).collect();
        }
    };

    let norm = linalg::norm(&p);
    let min_score = argmin(&scores).1;
    if norm <= 1e-12 || min_score <= 0.0 {
        return SupportMargin {
            r_star: 0.0,
            direction: Vec::new(),
            origin_in_hull: true,
            lower_bound: 0.0,
            gap,
            iterations,
        };
    }
    let direction: Vec<f64> = p.iter().map(|v| v / norm).collect();
    let lower_bound = points
        .iter()
        .map(|x| linalg::dot(&direction, x.as_slice()))
        .fold(f64::INFINITY, f64::min);
    SupportMargin {
        r_star: norm,
        direction,
        origin_in_hull: false,
        lower_bound,
        gap,
        iterations,
    }
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty")
}
