//! Randomized check of the strong convexity inequality
//!
//! ```text
//! f(a t1 + (1-a) t2) <= a f(t1) + (1-a) f(t2) - (mu/2) a (1-a) |t1 - t2|^2
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{eval_erm_ocsvm, eval_f, EmpiricalMeasure};
use crate::error::Result;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeObjective {
    /// `(|w|^2 + rho^2)/2 - lambda rho + E[(rho - <w,X>)_+]`
    Regularized,
    /// `(lambda/2)|w|^2 - lambda rho + E[(rho - <w,X>)_+]`
    ErmOcsvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeDirection {
    /// Both endpoints uniform in the box `[-radius, radius]^(dim+1)`.
    Random,
    /// Shared random `w`; both offsets below `min_i <w, x_i>` so the hinge is inactive.
    RhoOnly,
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeConfig {
    pub objective: ProbeObjective,
    pub direction: ProbeDirection,
    pub modulus: f64,
    pub num_trials: usize,
    pub seed: u64,
    pub radius: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            objective: ProbeObjective::Regularized,
            direction: ProbeDirection::Random,
            modulus: 1.0,
            num_trials: 1000,
            seed: 0,
            radius: 1.5,
        }
    }
}

/// Largest observed violation of the strong convexity inequality
/// (nonpositive up to rounding when the objective is `modulus`-strongly convex).
pub fn strong_convexity_probe(measure: &EmpiricalMeasure, lambda: f64, cfg: &ProbeConfig) -> Result<f64> {
    let dim = measure.dim();
    let objective = |w: &[f64], rho: f64| -> Result<f64> {
        match cfg.objective {
            ProbeObjective::Regularized => eval_f(w, rho, measure, lambda),
            ProbeObjective::ErmOcsvm => eval_erm_ocsvm(w, rho, measure, lambda),
        }
    };
    objective(&vec![0.0; dim], 0.0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = cfg.radius;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cfg.num_trials {
        let alpha: f64 = rng.random_range(0.0..1.0);
        let (w1, rho1, w2, rho2) = match cfg.direction {
            ProbeDirection::Random => {
                let w1: Vec<f64> = (0..dim).map(|_| rng.random_range(-r..r)).collect();
                let w2: Vec<f64> = (0..dim).map(|_| rng.random_range(-r..r)).collect();
                (w1, rng.random_range(-r..r), w2, rng.random_range(-r..r))
            }
            ProbeDirection::RhoOnly => {
                let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-r..r)).collect();
                let top = measure
                    .points()
                    .iter()
                    .map(|x| linalg::dot(&w, x.as_slice()))
                    .fold(f64::INFINITY, f64::min)
                    - 1e-9;
                let lo = top - 2.0 * r;
                let rho1 = rng.random_range(lo..top);
                let rho2 = rng.random_range(lo..top);
                (w.clone(), rho1, w, rho2)
            }
        };
        let w_mid: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        let rho_mid = alpha * rho1 + (1.0 - alpha) * rho2;
        let dist_sq = linalg::param_dist_sq(&w1, rho1, &w2, rho2);
        let chord = alpha * objective(&w1, rho1)? + (1.0 - alpha) * objective(&w2, rho2)?
            - 0.5 * cfg.modulus * alpha * (1.0 - alpha) * dist_sq;
        worst = worst.max(objective(&w_mid, rho_mid)? - chord);
    }
    Ok(worst)
}
