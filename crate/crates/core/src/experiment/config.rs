use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_features::recommended_feature_count;
use crate::learner::{ScheduleKind, SonarParams, StepSchedule};
use crate::sonarc::{CpdReference, TuneMode};
use crate::streams::{ColumnSelector, CsvOptions, LabelMapping, PRESETS};

pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_R_MIN: f64 = 0.5;
pub const DEFAULT_RUNS: usize = 20;
pub const SKAB_LAMBDA: f64 = 0.005;
pub const IOT_LAMBDA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sonar,
    SgdOcsvm,
    Sonarc,
    OracleRestart,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sonar => "sonar",
            Algorithm::SgdOcsvm => "sgd_ocsvm",
            Algorithm::Sonarc => "sonarc",
            Algorithm::OracleRestart => "oracle_restart",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "sonar" => Ok(Algorithm::Sonar),
            "sgd_ocsvm" => Ok(Algorithm::SgdOcsvm),
            "sonarc" => Ok(Algorithm::Sonarc),
            "oracle_restart" => Ok(Algorithm::OracleRestart),
            _ => Err(Error::config(format!(
                "unknown algorithm `{s}` (expected sonar, sgd_ocsvm, sonarc or oracle_restart)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    #[serde(default = "one")]
    pub base_rate: f64,
}

fn one() -> f64 {
    1.0
}

impl ScheduleConfig {
    pub fn theory() -> Self {
        ScheduleConfig {
            kind: ScheduleKind::Theory,
            base_rate: 1.0,
        }
    }

    pub fn build(&self) -> Result<StepSchedule> {
        StepSchedule::new(self.kind, self.base_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RffSettings {
    pub gamma: f64,
    pub r_min: f64,
    /// Defaults to `lambda / 2`.
    pub delta: Option<f64>,
    /// Explicit embedding dimension (even); otherwise derived from `r_min` and `delta`.
    pub dim: Option<usize>,
    /// Constant of the feature-count formula.
    pub c: f64,
    /// Fixed map seed shared by all runs; otherwise each run derives its own.
    pub seed: Option<u64>,
}

impl Default for RffSettings {
    fn default() -> Self {
        RffSettings {
            gamma: DEFAULT_GAMMA,
            r_min: DEFAULT_R_MIN,
            delta: None,
            dim: None,
            c: 1.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Preset {
        name: String,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        options: CsvOptions,
        #[serde(default = "yes")]
        standardize: bool,
        /// Standardize each point with estimates that exclude it.
        #[serde(default)]
        standardize_exclusive: bool,
    },
}

fn yes() -> bool {
    true
}

impl SourceConfig {
    pub fn preset(name: &str) -> Self {
        SourceConfig::Preset { name: name.to_string() }
    }

    pub fn csv(path: impl Into<PathBuf>, options: CsvOptions) -> Self {
        SourceConfig::Csv {
            path: path.into(),
            options,
            standardize: true,
            standardize_exclusive: false,
        }
    }
}

/// Where SONARC calibration streams come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    /// Stationary streams drawn from single phases of independently seeded presets.
    Phases,
    /// The (embedded) data stream itself.
    Data,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpdSettings {
    /// Fixed threshold `C`; tuned from `grid` when absent.
    pub threshold: Option<f64>,
    pub grid: Vec<f64>,
    pub tune_mode: TuneMode,
    /// Defaults to `lambda / 2`.
    pub delta: Option<f64>,
    /// Defaults to the stream length.
    pub horizon: Option<u64>,
    pub reference: CpdReference,
    /// Defaults to `phases` for presets and `data` for CSV sources.
    pub calibration: Option<Calibration>,
    pub calibration_runs: usize,
    /// Schedule of an extra learner used for decisions and margins.
    pub reporter: Option<ScheduleConfig>,
    /// Known change positions for `oracle_restart`; phase boundaries are used when absent.
    pub changepoints: Option<Vec<usize>>,
}

/// `10^n` for `n = -8..=2`, ascending.
pub fn decade_grid() -> Vec<f64> {
    (-8..=2).map(|n| 10f64.powi(n)).collect()
}

impl Default for CpdSettings {
    fn default() -> Self {
        CpdSettings {
            threshold: None,
            grid: decade_grid(),
            tune_mode: TuneMode::NoTrigger,
            delta: None,
            horizon: None,
            reference: CpdReference::Main,
            calibration: None,
            calibration_runs: DEFAULT_RUNS,
            reporter: None,
            changepoints: None,
        }
    }
}

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub epsilon: f64,
    /// Learning-rate schedule; see [`RunConfig::schedule`] for the per-algorithm default.
    pub schedule: Option<ScheduleConfig>,
    pub rff: RffSettings,
    pub source: SourceConfig,
    pub runs: usize,
    pub seed: u64,
    /// Parallel repetitions; all cores when absent.
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub smoothing_window: usize,
    /// Whether labeled outliers are used for updates.
    pub train_on_outliers: bool,
    pub cpd: CpdSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithm: Algorithm::Sonar,
            lambda: DEFAULT_LAMBDA,
            epsilon: 0.0,
            schedule: None,
            rff: RffSettings::default(),
            source: SourceConfig::preset("stationary2"),
            runs: DEFAULT_RUNS,
            seed: 0,
            workers: None,
            output: None,
            smoothing_window: crate::metrics::DEFAULT_SMOOTHING_WINDOW,
            train_on_outliers: false,
            cpd: CpdSettings::default(),
        }
    }
}

/// Dataset presets for real data.
pub const DATASET_PRESETS: [&str; 2] = ["skab", "iot"];

impl RunConfig {
    pub fn defaults() -> Self {
        Self::default()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Valve data: `;`-separated, `anomaly` labels, timestamp and changepoint columns dropped.
    pub fn skab(path: impl Into<PathBuf>) -> Self {
        let options = CsvOptions {
            delimiter: ';',
            label_column: Some(ColumnSelector::Name("anomaly".into())),
            exclude_columns: vec![
                ColumnSelector::Name("datetime".into()),
                ColumnSelector::Name("changepoint".into()),
            ],
            ..CsvOptions::default()
        };
        RunConfig {
            lambda: SKAB_LAMBDA,
            source: SourceConfig::csv(path, options),
            runs: 1,
            cpd: CpdSettings {
                tune_mode: TuneMode::DetectOne,
                ..CpdSettings::default()
            },
            ..RunConfig::default()
        }
    }

    /// Pre-extracted network-flow features with a `label` column.
    pub fn iot(path: impl Into<PathBuf>) -> Self {
        let options = CsvOptions {
            label_column: Some(ColumnSelector::Name("label".into())),
            label_mapping: LabelMapping {
                normal: vec!["0".into(), "benign".into(), "Benign".into()],
                outlier: vec!["1".into(), "malicious".into(), "Malicious".into()],
            },
            ..CsvOptions::default()
        };
        RunConfig {
            lambda: IOT_LAMBDA,
            source: SourceConfig::csv(path, options),
            runs: 1,
            ..RunConfig::default()
        }
    }

    pub fn dataset_preset(name: &str, path: impl Into<PathBuf>) -> Result<Self> {
        match name {
            "skab" => Ok(Self::skab(path)),
            "iot" => Ok(Self::iot(path)),
            other => Err(Error::config(format!(
                "unknown dataset preset `{other}`; valid: {}",
                DATASET_PRESETS.join(", ")
            ))),
        }
    }

    /// Theory rate for the SONAR family, AdaGrad with `eta_0 = 0.1` for SGD-OCSVM.
    pub fn schedule(&self) -> ScheduleConfig {
        self.schedule.unwrap_or(match self.algorithm {
            Algorithm::SgdOcsvm => ScheduleConfig {
                kind: ScheduleKind::Adagrad,
                base_rate: 0.1,
            },
            _ => ScheduleConfig::theory(),
        })
    }

    pub fn params(&self) -> SonarParams {
        SonarParams::new(self.lambda).with_epsilon(self.epsilon)
    }

    pub fn rff_delta(&self) -> f64 {
        self.rff.delta.unwrap_or(self.lambda / 2.0)
    }

    pub fn cpd_delta(&self) -> f64 {
        self.cpd.delta.unwrap_or(self.lambda / 2.0)
    }

    /// Embedding dimension for raw inputs of dimension `input_dim`.
    pub fn feature_dim(&self, input_dim: usize) -> Result<usize> {
        let d = match self.rff.dim {
            Some(d) => d,
            None => recommended_feature_count(input_dim, self.rff.r_min, self.rff_delta(), self.rff.c)?,
        };
        Ok(d + d % 2)
    }

    pub fn calibration(&self) -> Calibration {
        self.cpd.calibration.unwrap_or(match self.source {
            SourceConfig::Preset { .. } => Calibration::Phases,
            SourceConfig::Csv { .. } => Calibration::Data,
        })
    }

    /// Field-level validation of everything reachable from the config surface.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: Error| match e {
            Error::Config(m) => Error::Config(format!("{name}: {m}")),
            other => other,
        };
        self.params().validate().map_err(|e| field("lambda/epsilon", e))?;
        self.schedule().build().map_err(|e| field("schedule", e))?;
        if self.runs == 0 {
            return Err(Error::config("runs: must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers: must be at least 1"));
        }
        if self.smoothing_window == 0 {
            return Err(Error::config("smoothing_window: must be at least 1"));
        }
        if !(self.rff.gamma.is_finite() && self.rff.gamma > 0.0) {
            return Err(Error::config(format!("rff.gamma: must be > 0, got {}", self.rff.gamma)));
        }
        match self.rff.dim {
            Some(0) => return Err(Error::config("rff.dim: must be positive")),
            Some(_) => {}
            None => {
                recommended_feature_count(1, self.rff.r_min, self.rff_delta(), self.rff.c)
                    .map_err(|e| field("rff", e))?;
            }
        }
        match &self.source {
            SourceConfig::Preset { name } if !PRESETS.contains(&name.as_str()) => {
                return Err(Error::config(format!(
                    "source.name: unknown preset `{name}`; valid presets: {}",
                    PRESETS.join(", ")
                )))
            }
            SourceConfig::Csv { options, .. } if !options.delimiter.is_ascii() => {
                return Err(Error::config("source.options.delimiter: must be ASCII"))
            }
            _ => {}
        }
        if self.algorithm == Algorithm::Sonarc {
            let d = self.cpd_delta();
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::config(format!("cpd.delta: must lie in (0, 1), got {d}")));
            }
            if let Some(c) = self.cpd.threshold {
                if c.is_nan() || c <= 0.0 {
                    return Err(Error::config(format!("cpd.threshold: must be positive, got {c}")));
                }
            } else {
                if self.cpd.grid.is_empty() {
                    return Err(Error::config("cpd.grid: must be nonempty when no threshold is set"));
                }
                if self
                    .cpd
                    .grid
                    .windows(2)
                    .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
                    || self.cpd.grid.iter().any(|c| c.is_nan() || *c <= 0.0)
                {
                    return Err(Error::config("cpd.grid: must be positive and strictly ascending"));
                }
                if self.calibration() == Calibration::Phases && self.cpd.calibration_runs == 0 {
                    return Err(Error::config("cpd.calibration_runs: must be at least 1"));
                }
                if self.calibration() == Calibration::Phases && matches!(self.source, SourceConfig::Csv { .. }) {
                    return Err(Error::config("cpd.calibration: `phases` requires a preset source"));
                }
            }
            if self.cpd.horizon.is_some_and(|h| h < 2) {
                return Err(Error::config("cpd.horizon: must be at least 2"));
            }
            if let Some(r) = &self.cpd.reporter {
                r.build().map_err(|e| field("cpd.reporter", e))?;
            }
        }
        if self.algorithm == Algorithm::OracleRestart
            && self.cpd.changepoints.is_none()
            && matches!(self.source, SourceConfig::Csv { .. })
        {
            return Err(Error::config(
                "cpd.changepoints: required for oracle_restart on CSV sources",
            ));
        }
        Ok(())
    }
}
