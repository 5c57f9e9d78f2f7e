//! Baseline: plain SGD on the RFF-linearized OCSVM risk
//! `(lambda/2)|w|^2 - lambda rho + E[(rho - <w, X>)_+]`.
//!
//! Classification and margins reuse [`ModelState::classify`] and
//! [`ModelState::margin`].

use crate::error::{Error, Result};
use crate::kernel_features::FeatureVector;
use crate::learner::{ModelState, SonarParams};
use crate::linalg;

/// `|w|` beyond which a run is aborted.
pub const DIVERGENCE_LIMIT: f64 = 10.0;

/// One subgradient step; returns `Z = 1{rho >= <w, x>}` on the pre-update state.
pub fn step_ocsvm(state: &mut ModelState, x: &FeatureVector, params: &SonarParams) -> Result<bool> {
    state.check_input(x)?;
    let lambda = params.lambda;
    let score = state.score(x);
    let z = state.rho >= score;
    let zf = if z { 1.0 } else { 0.0 };
    let grad_sq = if state.schedule.needs_gradient() {
        // |lambda w - Z x|^2 + (Z - lambda)^2
        let w_sq = linalg::norm_sq(&state.w);
        lambda * lambda * w_sq - 2.0 * lambda * zf * score + zf + (zf - lambda) * (zf - lambda)
    } else {
        0.0
    };
    let eta = state.schedule.next_rate(state.t, grad_sq);
    linalg::scale(1.0 - eta * lambda, &mut state.w);
    if z {
        linalg::axpy(eta, x.as_slice(), &mut state.w);
    }
    state.rho -= eta * (zf - lambda);
    state.t += 1;
    let norm = linalg::norm(&state.w);
    if norm.is_nan() || norm > DIVERGENCE_LIMIT {
        return Err(Error::Diverged {
            step: state.t,
            norm,
            limit: DIVERGENCE_LIMIT,
        });
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{Decision, StepSchedule};
    use crate::oracle::{eval_erm_ocsvm, EmpiricalMeasure};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn first_step_from_zero() {
        let mut s = ModelState::new(2, StepSchedule::theory());
        let p = SonarParams::new(0.1);
        assert!(step_ocsvm(&mut s, &fv(&[0.6, 0.8]), &p).unwrap());
        assert_eq!(s.w, vec![0.6, 0.8]);
        assert!((s.rho - (0.1 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn accepted_point_branch() {
        let mut s = ModelState::new(2, StepSchedule::theory());
        s.w = vec![0.8, 0.0];
        s.rho = 0.2;
        s.t = 1;
        let p = SonarParams::new(0.1);
        assert!(!step_ocsvm(&mut s, &fv(&[1.0, 0.0]), &p).unwrap());
        // eta = 1/2
        assert!((s.w[0] - 0.8 * (1.0 - 0.05)).abs() < 1e-15);
        assert!((s.rho - (0.2 + 0.05)).abs() < 1e-15);
    }

    #[test]
    fn shares_decision_rule() {
        let mut s = ModelState::new(2, StepSchedule::theory());
        s.w = vec![1.0, 0.0];
        s.rho = 0.5;
        assert_eq!(s.classify(&fv(&[1.0, 0.0]), 0.0), Decision::Normal);
        assert_eq!(s.margin(), Some(0.5));
    }

    #[test]
    fn divergence_is_reported() {
        // eta = 1, lambda = 0 and a flagged point: w' = w + x.
        let mut s = ModelState::new(1, StepSchedule::theory());
        s.w = vec![9.95];
        s.rho = 20.0;
        let err = step_ocsvm(&mut s, &fv(&[1.0]), &SonarParams::new(0.0)).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    /// The averaged update direction over a fixed dataset equals the
    /// gradient of the empirical risk away from hinge kinks.
    #[test]
    fn averaged_update_is_a_subgradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<FeatureVector> = (0..30)
            .map(|_| {
                let mut v: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
                v[0] = v[0].abs() + 0.5;
                FeatureVector::normalized(v).unwrap()
            })
            .collect();
        let m = EmpiricalMeasure::uniform(pts.clone()).unwrap();
        let lambda = 0.2;
        let p = SonarParams::new(lambda);
        let eta = 1e-3;
        let h = 1e-7;
        let mut checked = 0;
        for _ in 0..100 {
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rho: f64 = rng.random_range(-1.0..1.0);
            if pts.iter().any(|x| (rho - linalg::dot(&w, x.as_slice())).abs() < 1e-4) {
                continue;
            }
            // Average displacement of one step from (w, rho) over the dataset, divided by -eta.
            let mut dir_w = [0.0; 4];
            let mut dir_rho = 0.0;
            for x in &pts {
                let mut s = ModelState::new(4, StepSchedule::bottou(eta));
                s.w = w.clone();
                s.rho = rho;
                // Bottou with t = 0 uses eta_0 exactly.
                step_ocsvm(&mut s, x, &p).unwrap();
                for k in 0..4 {
                    dir_w[k] += (w[k] - s.w[k]) / (eta * pts.len() as f64);
                }
                dir_rho += (rho - s.rho) / (eta * pts.len() as f64);
            }
            for k in 0..4 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[k] += h;
                wm[k] -= h;
                let fd = (eval_erm_ocsvm(&wp, rho, &m, lambda).unwrap()
                    - eval_erm_ocsvm(&wm, rho, &m, lambda).unwrap())
                    / (2.0 * h);
                assert!((fd - dir_w[k]).abs() < 1e-5);
            }
            let fd = (eval_erm_ocsvm(&w, rho + h, &m, lambda).unwrap()
                - eval_erm_ocsvm(&w, rho - h, &m, lambda).unwrap())
                / (2.0 * h);
            assert!((fd - dir_rho).abs() < 1e-5);
            checked += 1;
        }
        assert!(checked > 20);
    }
}
