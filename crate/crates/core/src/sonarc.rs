//! SONARC: a main SONAR learner plus base learners restarted at dyadic
//! periods, with a discrepancy test that restarts everything when the stream
//! moves.
//!
//! Base `m` (for `m = 1..=floor(log2 T)`) restarts its schedule every `2^m`
//! steps and keeps the iterate it held just before the most recent restart.
//! After every step the ensemble evaluates, for each base with a snapshot,
//!
//! ```text
//! ratio_m = |(w, rho) - snapshot_m|^2 * 2^m / (ln T * ln(1/delta))
//! ```
//!
//! and restarts with horizon `T - t` as soon as some `ratio_m >= C`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_features::FeatureVector;
use crate::learner::{Decision, ModelState, SonarParams, StepSchedule};
use crate::metrics::MetricTrace;
use crate::sonar;
use crate::streams::Label;

/// Iterate compared against the base snapshots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpdReference {
    /// A theory-schedule learner running since the last restart.
    #[default]
    Main,
    /// The current iterate of the base with the longest period.
    SlowestBase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpdConfig {
    pub horizon: u64,
    pub lambda: f64,
    pub delta: f64,
    pub threshold: f64,
    #[serde(default)]
    pub reference: CpdReference,
}

impl CpdConfig {
    pub fn new(horizon: u64, lambda: f64, delta: f64, threshold: f64) -> Self {
        CpdConfig {
            horizon,
            lambda,
            delta,
            threshold,
            reference: CpdReference::Main,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::config(format!(
                "cpd horizon must be at least 2, got {}",
                self.horizon
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::config(format!(
                "threshold C must be positive, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Number of dyadic scales for horizon `t`.
pub fn num_scales(horizon: u64) -> u32 {
    if horizon < 2 {
        0
    } else {
        63 - horizon.leading_zeros()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseLearner {
    pub m: u32,
    pub state: ModelState,
    pub snapshot: Option<(Vec<f64>, f64)>,
}

impl BaseLearner {
    pub fn period(&self) -> u64 {
        1 << self.m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpdEnsemble {
    pub main: ModelState,
    /// Optional learner with its own schedule, used for decisions and margins.
    pub reporter: Option<ModelState>,
    pub bases: Vec<BaseLearner>,
    /// Horizon of the current era (`T` minus the steps consumed before the last restart).
    pub horizon: u64,
    pub steps_since_restart: u64,
    pub total_steps: u64,
    /// Zero-based step positions at which restarts fired.
    pub restart_log: Vec<u64>,
    params: SonarParams,
    reporter_schedule: Option<StepSchedule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpdStep {
    /// Update indicator of the reporting learner before the step.
    pub flagged: bool,
    pub restarted: bool,
    /// `ratio_m` per scale; `None` until base `m` holds a snapshot.
    pub ratios: Vec<Option<f64>>,
}

impl CpdStep {
    pub fn max_ratio(&self) -> Option<f64> {
        self.ratios.iter().flatten().copied().reduce(f64::max)
    }
}

impl CpdEnsemble {
    pub fn new(dim: usize, cfg: &CpdConfig, params: SonarParams) -> Result<Self> {
        Self::with_reporter(dim, cfg, params, None)
    }

    pub fn with_reporter(
        dim: usize,
        cfg: &CpdConfig,
        params: SonarParams,
        reporter_schedule: Option<StepSchedule>,
    ) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        if (params.lambda - cfg.lambda).abs() > 0.0 {
            return Err(Error::config("learner lambda and cpd lambda differ"));
        }
        let mut ens = CpdEnsemble {
            main: ModelState::from_params(dim, &params, StepSchedule::theory())?,
            reporter: None,
            bases: Vec::new(),
            horizon: cfg.horizon,
            steps_since_restart: 0,
            total_steps: 0,
            restart_log: Vec::new(),
            params,
            reporter_schedule,
        };
        ens.rebuild(cfg.horizon)?;
        Ok(ens)
    }

    fn rebuild(&mut self, horizon: u64) -> Result<()> {
        let dim = self.main.dim();
        self.horizon = horizon;
        self.steps_since_restart = 0;
        self.main = ModelState::from_params(dim, &self.params, StepSchedule::theory())?;
        self.reporter = match &self.reporter_schedule {
            Some(s) => Some(ModelState::from_params(dim, &self.params, s.clone())?),
            None => None,
        };
        self.bases = (1..=num_scales(horizon))
            .map(|m| {
                Ok(BaseLearner {
                    m,
                    state: ModelState::from_params(dim, &self.params, StepSchedule::theory())?,
                    snapshot: None,
                })
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn params(&self) -> &SonarParams {
        &self.params
    }

    /// The learner whose decisions and margins are reported.
    pub fn decision_state(&self) -> &ModelState {
        self.reporter.as_ref().unwrap_or(&self.main)
    }

    pub fn classify(&self, x: &FeatureVector) -> Decision {
        self.decision_state().classify(x, self.params.epsilon)
    }

    fn reference(&self, cfg: &CpdConfig) -> (&[f64], f64) {
        match (cfg.reference, self.bases.last()) {
            (CpdReference::SlowestBase, Some(b)) => (&b.state.w, b.state.rho),
            _ => (&self.main.w, self.main.rho),
        }
    }

    /// Normalized discrepancy per scale, `ratio_m` as in the module docs.
    pub fn statistics(&self, cfg: &CpdConfig) -> Vec<Option<f64>> {
        let scale = (self.horizon as f64).ln() * (1.0 / cfg.delta).ln();
        let (w, rho) = self.reference(cfg);
        self.bases
            .iter()
            .map(|b| {
                b.snapshot
                    .as_ref()
                    .map(|(sw, srho)| crate::linalg::param_dist_sq(w, rho, sw, *srho) * b.period() as f64 / scale)
            })
            .collect()
    }

    pub fn step(&mut self, x: &FeatureVector, cfg: &CpdConfig) -> Result<CpdStep> {
        if self.steps_since_restart >= self.horizon {
            return Err(Error::input(format!(
                "cpd horizon exhausted after {} steps",
                self.total_steps
            )));
        }
        let z_main = sonar::step(&mut self.main, x, &self.params)?;
        let flagged = match &mut self.reporter {
            Some(r) => sonar::step(r, x, &self.params)?,
            None => z_main,
        };
        for b in &mut self.bases {
            sonar::step(&mut b.state, x, &self.params)?;
            if b.state.t == b.period() {
                b.snapshot = Some((b.state.w.clone(), b.state.rho));
                b.state.reset_schedule();
            }
        }
        self.steps_since_restart += 1;
        self.total_steps += 1;

        let ratios = self.statistics(cfg);
        let restarted = ratios.iter().flatten().any(|r| *r >= cfg.threshold);
        if restarted {
            self.restart_log.push(self.total_steps - 1);
            self.rebuild(self.horizon - self.steps_since_restart)?;
        }
        Ok(CpdStep {
            flagged,
            restarted,
            ratios,
        })
    }
}

/// Free-function form of [`CpdEnsemble::step`].
pub fn cpd_step(ens: &mut CpdEnsemble, x: &FeatureVector, cfg: &CpdConfig) -> Result<CpdStep> {
    ens.step(x, cfg)
}

/// Largest `ratio_m` seen over a pass that never restarts.
pub fn max_statistic(stream: &[FeatureVector], template: &CpdConfig, params: &SonarParams) -> Result<f64> {
    let dim = stream.first().map_or(0, FeatureVector::dim);
    let cfg = CpdConfig {
        threshold: f64::INFINITY,
        ..template.clone()
    };
    let mut ens = CpdEnsemble::new(dim, &cfg, params.clone())?;
    let mut max = 0.0f64;
    for x in stream {
        let s = ens.step(x, &cfg)?;
        if let Some(r) = s.max_ratio() {
            max = max.max(r);
        }
    }
    Ok(max)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMode {
    /// Smallest grid value that never fires on the calibration streams.
    #[default]
    NoTrigger,
    /// Largest grid value that fires at least once.
    DetectOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub threshold: f64,
    /// Per-stream largest statistic.
    pub max_statistics: Vec<f64>,
    /// `(C, number of streams on which C fires)`.
    pub counts: Vec<(f64, usize)>,
}

/// Selects a threshold from an ascending grid.
///
/// A run with threshold `C` coincides with the no-restart pass up to its first
/// restart, so a stream fires under `C` exactly when its largest statistic is
/// at least `C`.
pub fn tune_threshold(
    streams: &[Vec<FeatureVector>],
    template: &CpdConfig,
    params: &SonarParams,
    grid: &[f64],
    mode: TuneMode,
) -> Result<TuneReport> {
    if grid.is_empty() {
        return Err(Error::config("threshold grid is empty"));
    }
    if grid
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        || grid.iter().any(|c| c.is_nan() || *c <= 0.0)
    {
        return Err(Error::config("threshold grid must be positive and strictly ascending"));
    }
    if streams.is_empty() {
        return Err(Error::config("no calibration streams"));
    }
    let max_statistics: Vec<f64> = streams
        .par_iter()
        .map(|s| max_statistic(s, template, params))
        .collect::<Result<_>>()?;
    let counts: Vec<(f64, usize)> = grid
        .iter()
        .map(|&c| (c, max_statistics.iter().filter(|&&m| m >= c).count()))
        .collect();
    let pick = match mode {
        TuneMode::NoTrigger => counts.iter().find(|(_, n)| *n == 0),
        TuneMode::DetectOne => counts.iter().rev().find(|(_, n)| *n > 0),
    };
    match pick {
        Some(&(threshold, _)) => Ok(TuneReport {
            threshold,
            max_statistics,
            counts,
        }),
        None => Err(Error::Tuning { counts }),
    }
}

/// Plain SONAR whose schedule restarts at the given positions. Labeled
/// outliers are classified but not trained on.
pub fn oracle_restart_runner(
    events: &[(FeatureVector, Option<Label>)],
    changepoints: &[usize],
    params: &SonarParams,
    schedule: StepSchedule,
) -> Result<MetricTrace> {
    if let Some(bad) = changepoints.iter().find(|&&c| c >= events.len()) {
        return Err(Error::input(format!(
            "changepoint {bad} outside stream of length {}",
            events.len()
        )));
    }
    let dim = events.first().map_or(0, |(x, _)| x.dim());
    let mut state = ModelState::from_params(dim, params, schedule)?;
    let mut resets = vec![false; events.len()];
    for &c in changepoints {
        resets[c] = true;
    }
    let mut trace = MetricTrace::with_capacity(events.len());
    for (k, (x, label)) in events.iter().enumerate() {
        if resets[k] {
            state.reset_schedule();
        }
        let decision = state.classify(x, params.epsilon);
        if *label != Some(Label::Outlier) {
            sonar::step(&mut state, x, params)?;
        }
        trace.record(k as u64, *label, decision, state.margin(), resets[k]);
    }
    Ok(trace)
}
