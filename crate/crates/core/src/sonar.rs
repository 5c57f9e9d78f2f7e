//! SONAR: SGD on the strongly convex one-class objective.
//!
//! One step with rate `eta` on a unit-norm point `x`:
//!
//! ```text
//! Z    = 1{<w, x> <= rho}
//! w'   = (1 - eta) w + eta Z x
//! rho' = (1 - eta) rho + eta (lambda - Z)
//! ```
//!
//! Both updates are convex combinations, so with `eta` in `(0, 1]` the
//! iterates never leave `{|w| <= 1, |rho| <= 1}`.

use crate::error::{Error, Result};
use crate::kernel_features::FeatureVector;
use crate::learner::{ModelState, ScheduleKind, SonarParams};
use crate::linalg;

/// Takes one SONAR step and returns `Z`, the update indicator evaluated on
/// the pre-update state.
pub fn step(state: &mut ModelState, x: &FeatureVector, params: &SonarParams) -> Result<bool> {
    state.check_input(x)?;
    let score = state.score(x);
    let z = score <= state.rho;
    let zf = if z { 1.0 } else { 0.0 };
    let grad_sq = if state.schedule.needs_gradient() {
        // |w - Z x|^2 + (rho - lambda + Z)^2 with |x| = 1
        let w_sq = linalg::norm_sq(&state.w);
        let g_rho = state.rho - params.lambda + zf;
        w_sq - 2.0 * zf * score + zf + g_rho * g_rho
    } else {
        0.0
    };
    let eta = state.schedule.next_rate(state.t, grad_sq);
    linalg::scale(1.0 - eta, &mut state.w);
    if z {
        linalg::axpy(eta, x.as_slice(), &mut state.w);
    }
    state.rho = (1.0 - eta) * state.rho + eta * (params.lambda - zf);
    state.t += 1;
    debug_assert!(linalg::norm(&state.w) <= 1.0 + 1e-9, "w left the unit ball");
    debug_assert!(state.rho.abs() <= 1.0 + 1e-9, "rho left [-1, 1]");
    Ok(z)
}

/// A recorded run of consecutive SONAR steps.
#[derive(Debug, Clone)]
pub struct SonarTrace {
    pub lambda: f64,
    pub schedule: ScheduleKind,
    /// Iterates `(w, rho, t)`; entry `k + 1` follows step `k`.
    pub states: Vec<(Vec<f64>, f64, u64)>,
    pub inputs: Vec<FeatureVector>,
    pub flags: Vec<bool>,
}

impl SonarTrace {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Runs SONAR over `inputs` from `state`, recording every iterate.
pub fn record_trace<'a>(
    state: &mut ModelState,
    inputs: impl IntoIterator<Item = &'a FeatureVector>,
    params: &SonarParams,
) -> Result<SonarTrace> {
    let mut trace = SonarTrace {
        lambda: params.lambda,
        schedule: state.schedule.kind,
        states: vec![(state.w.clone(), state.rho, state.t)],
        inputs: Vec::new(),
        flags: Vec::new(),
    };
    for x in inputs {
        let z = step(state, x, params)?;
        trace.states.push((state.w.clone(), state.rho, state.t));
        trace.inputs.push(x.clone());
        trace.flags.push(z);
    }
    Ok(trace)
}

/// Replays the per-step margin lower bound along a theory-schedule trace:
///
/// ```text
/// r_s - r_{s-1} >= (lambda - Z_s (1 + |r_{s-1}|)) / (k |w_{s-1} + Z_s X_s / k|)
/// ```
///
/// where `k` is the number of steps completed before step `s` (so the step
/// used rate `1/(k+1)`). Steps with `k = 0`, or with an undefined margin on
/// either side, are skipped. Returns the largest violation (`0` for an
/// empty trace).
pub fn margin_recursion_check(trace: &SonarTrace) -> Result<f64> {
    if trace.schedule != ScheduleKind::Theory {
        return Err(Error::config("margin recursion only holds under the theory schedule"));
    }
    let mut worst: f64 = 0.0;
    for (s, (x, &z)) in trace.inputs.iter().zip(&trace.flags).enumerate() {
        let (w_prev, rho_prev, k) = &trace.states[s];
        let (w_next, rho_next, _) = &trace.states[s + 1];
        if *k == 0 {
            continue;
        }
        let (n_prev, n_next) = (linalg::norm(w_prev), linalg::norm(w_next));
        if n_prev <= 1e-12 || n_next <= 1e-12 {
            continue;
        }
        let r_prev = rho_prev / n_prev;
        let r_next = rho_next / n_next;
        let kf = *k as f64;
        let zf = if z { 1.0 } else { 0.0 };
        let mut shifted = w_prev.clone();
        linalg::axpy(zf / kf, x.as_slice(), &mut shifted);
        let bound = (trace.lambda - zf * (1.0 + r_prev.abs())) / (kf * linalg::norm(&shifted));
        worst = worst.max(bound - (r_next - r_prev));
    }
    Ok(worst)
}

/// Checks the deterministic part of the transfer bound: every probe point
/// rejected by `current` (strictly, `<w_t, x> < rho_t`) satisfies
/// `<w_{t0}, x> < rho_{t0} + lambda (t - t0) / t0` for the earlier `anchor`.
///
/// Both states must come from one theory-schedule run with `anchor.t >= 1`.
/// Returns the largest `lhs - rhs` over rejected probes (negative when the
/// bound holds), or `None` when no probe is rejected.
pub fn transfer_bound_check(
    anchor: &ModelState,
    current: &ModelState,
    probes: &[FeatureVector],
    lambda: f64,
) -> Result<Option<f64>> {
    if anchor.schedule.kind != ScheduleKind::Theory || current.schedule.kind != ScheduleKind::Theory {
        return Err(Error::config("transfer bound requires the theory schedule"));
    }
    if anchor.t == 0 || current.t < anchor.t {
        return Err(Error::input(
            "anchor must precede current and have taken at least one step",
        ));
    }
    let slack = lambda * (current.t - anchor.t) as f64 / anchor.t as f64;
    let worst = probes
        .iter()
        .filter(|x| current.score(x) < current.rho)
        .map(|x| anchor.score(x) - (anchor.rho + slack))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    Ok(worst)
}
