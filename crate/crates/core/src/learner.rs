//! Learner state shared by the SONAR update and the SGD-OCSVM baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_features::{FeatureVector, RffConfig};
use crate::linalg;

/// Outcome of classifying one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Normal,
    Outlier,
}

impl Decision {
    pub fn is_outlier(self) -> bool {
        self == Decision::Outlier
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `eta_t = 1/(t+1)`.
    Theory,
    /// `eta_t = min(1, eta_0 / sqrt(1 + sum_{s<=t} |g_s|^2))`.
    Adagrad,
    /// `eta_t = eta_0' / (1 + eta_0' t)` with `eta_0' = min(eta_0, 0.5)`.
    Bottou,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theory" => Ok(ScheduleKind::Theory),
            "adagrad" => Ok(ScheduleKind::Adagrad),
            "bottou" => Ok(ScheduleKind::Bottou),
            other => Err(Error::config(format!(
                "unknown schedule `{other}` (expected theory, adagrad or bottou)"
            ))),
        }
    }
}

/// Step-size schedule. Every emitted rate lies in `(0, 1]`, which keeps the
/// SONAR iterates inside the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub base_rate: f64,
    /// Running sum of squared subgradient norms (AdaGrad only).
    #[serde(default)]
    pub accumulator: f64,
}

impl StepSchedule {
    pub fn theory() -> Self {
        StepSchedule {
            kind: ScheduleKind::Theory,
            base_rate: 1.0,
            accumulator: 0.0,
        }
    }

    pub fn adagrad(base_rate: f64) -> Self {
        StepSchedule {
            kind: ScheduleKind::Adagrad,
            base_rate,
            accumulator: 0.0,
        }
    }

    pub fn bottou(base_rate: f64) -> Self {
        StepSchedule {
            kind: ScheduleKind::Bottou,
            base_rate,
            accumulator: 0.0,
        }
    }

    pub fn new(kind: ScheduleKind, base_rate: f64) -> Result<Self> {
        if !(base_rate.is_finite() && base_rate > 0.0) {
            return Err(Error::config(format!(
                "base learning rate must be > 0, got {base_rate}"
            )));
        }
        Ok(StepSchedule {
            kind,
            base_rate,
            accumulator: 0.0,
        })
    }

    pub(crate) fn needs_gradient(&self) -> bool {
        self.kind == ScheduleKind::Adagrad
    }

    /// Rate for the step taken after `t` completed steps; `grad_sq` is the
    /// squared norm of the current stochastic subgradient.
    pub(crate) fn next_rate(&mut self, t: u64, grad_sq: f64) -> f64 {
        match self.kind {
            ScheduleKind::Theory => 1.0 / (t as f64 + 1.0),
            ScheduleKind::Adagrad => {
                self.accumulator += grad_sq;
                (self.base_rate / (1.0 + self.accumulator).sqrt()).min(1.0)
            }
            ScheduleKind::Bottou => {
                let eta0 = self.base_rate.min(0.5);
                eta0 / (1.0 + eta0 * t as f64)
            }
        }
    }

    pub(crate) fn reset(&mut self) {
        self.accumulator = 0.0;
    }
}

/// Parameters of the online learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SonarParams {
    /// Anticipated outlier proportion.
    pub lambda: f64,
    /// Relative shrink of the acceptance threshold used by [`ModelState::classify`].
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub init_w: Option<Vec<f64>>,
    #[serde(default)]
    pub init_rho: f64,
}

impl SonarParams {
    pub fn new(lambda: f64) -> Self {
        SonarParams {
            lambda,
            epsilon: 0.0,
            init_w: None,
            init_rho: 0.0,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::config(format!(
                "epsilon must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        if let Some(w) = &self.init_w {
            if linalg::norm(w) > 1.0 + 1e-12 {
                return Err(Error::config("initial w must have norm at most 1"));
            }
        }
        if self.init_rho.abs() > 1.0 {
            return Err(Error::config("initial rho must lie in [-1, 1]"));
        }
        Ok(())
    }
}

/// The learner pair `(w, rho)` plus its step counter and schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub w: Vec<f64>,
    pub rho: f64,
    /// Steps taken since the last learning-rate reset.
    pub t: u64,
    pub schedule: StepSchedule,
}

impl ModelState {
    /// Zero-initialized state of dimension `dim`.
    pub fn new(dim: usize, schedule: StepSchedule) -> Self {
        ModelState {
            w: vec![0.0; dim],
            rho: 0.0,
            t: 0,
            schedule,
        }
    }

    /// State initialized from `params.init_w` / `params.init_rho`.
    pub fn from_params(dim: usize, params: &SonarParams, schedule: StepSchedule) -> Result<Self> {
        params.validate()?;
        let w = match &params.init_w {
            Some(w) if w.len() != dim => {
                return Err(Error::input(format!(
                    "initial w has dimension {}, expected {dim}",
                    w.len()
                )))
            }
            Some(w) => w.clone(),
            None => vec![0.0; dim],
        };
        Ok(ModelState {
            w,
            rho: params.init_rho,
            t: 0,
            schedule,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `<w, x>`
    pub fn score(&self, x: &FeatureVector) -> f64 {
        linalg::dot(&self.w, x.as_slice())
    }

    /// Outlier iff `<w, x> < rho (1 - epsilon)`. Does not change the state.
    pub fn classify(&self, x: &FeatureVector, epsilon: f64) -> Decision {
        if self.score(x) < self.rho * (1.0 - epsilon) {
            Decision::Outlier
        } else {
            Decision::Normal
        }
    }

    /// `rho / |w|`, or `None` when `|w| <= 1e-12`.
    pub fn margin(&self) -> Option<f64> {
        let n = linalg::norm(&self.w);
        (n > 1e-12).then(|| self.rho / n)
    }

    /// Restarts the learning-rate schedule without touching `(w, rho)`.
    pub fn reset_schedule(&mut self) {
        self.t = 0;
        self.schedule.reset();
    }

    pub fn dist_sq(&self, w: &[f64], rho: f64) -> f64 {
        linalg::param_dist_sq(&self.w, self.rho, w, rho)
    }

    pub(crate) fn check_input(&self, x: &FeatureVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::input(format!(
                "feature dimension {} does not match learner dimension {}",
                x.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Current format version of [`Snapshot`].
pub const SNAPSHOT_VERSION: u32 = 1;

/// Serialized learner state, sufficient to warm-start a learner in another
/// process and to re-embed raw points consistently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub algorithm: String,
    pub state: ModelState,
    pub params: SonarParams,
    pub rff: RffConfig,
}

impl Snapshot {
    pub fn new(algorithm: impl Into<String>, state: ModelState, params: SonarParams, rff: RffConfig) -> Self {
        Snapshot {
            version: SNAPSHOT_VERSION,
            algorithm: algorithm.into(),
            state,
            params,
            rff,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(s)?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::input(format!(
                "unsupported snapshot version {} (expected {SNAPSHOT_VERSION})",
                snap.version
            )));
        }
        if snap.state.dim() != snap.rff.feature_dim() {
            return Err(Error::input("snapshot state dimension does not match its feature map"));
        }
        Ok(snap)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
