use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, Calibration, RunConfig, SourceConfig};
use crate::error::{Error, Result};
use crate::kernel_features::{sample_rff, FeatureVector, RffConfig, RffMap};
use crate::learner::{Decision, ModelState, Snapshot, SonarParams};
use crate::metrics::{self, AggregateTrace, MetricTrace};
use crate::sonarc::{tune_threshold, CpdConfig, CpdEnsemble, TuneReport};
use crate::streams::{
    generate, ingest_csv, phase_changepoints, preset, Label, PhaseSpec, RunningStandardizer, StreamEvent,
};
use crate::{sgd_ocsvm, sonar};

/// Seeds of one repetition, derived from the base seed and the run index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub run: usize,
    pub stream_seed: u64,
    pub rff_seed: u64,
}

const CALIBRATION_STREAM_OFFSET: u64 = 1 << 32;

fn derive_seeds(base: u64, stream_id: u64, run: usize) -> RunSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream_id);
    RunSeeds {
        run,
        stream_seed: rng.random(),
        rff_seed: rng.random(),
    }
}

pub fn run_seeds(cfg: &RunConfig, run: usize) -> RunSeeds {
    let mut s = derive_seeds(cfg.seed, run as u64, run);
    if let Some(fixed) = cfg.rff.seed {
        s.rff_seed = fixed;
    }
    s
}

fn calibration_seeds(cfg: &RunConfig, k: usize) -> RunSeeds {
    derive_seeds(cfg.seed, CALIBRATION_STREAM_OFFSET + k as u64, k)
}

/// Raw events of one repetition.
pub fn load_events(cfg: &RunConfig, seeds: &RunSeeds) -> Result<Vec<StreamEvent>> {
    match &cfg.source {
        SourceConfig::Preset { name } => Ok(generate(preset(name, seeds.stream_seed)?)?.collect()),
        SourceConfig::Csv { path, options, .. } => ingest_csv(path, options),
    }
}

pub fn build_map(cfg: &RunConfig, input_dim: usize, rff_seed: u64) -> Result<RffMap> {
    let d = cfg.feature_dim(input_dim)?;
    sample_rff(RffConfig {
        gamma: cfg.rff.gamma,
        num_pairs: d / 2,
        input_dim,
        seed: rff_seed,
    })
}

/// Embeds raw events in stream order, standardizing CSV sources when configured.
pub struct Embedder<'a> {
    map: &'a RffMap,
    standardizer: Option<RunningStandardizer>,
}

impl<'a> Embedder<'a> {
    pub fn new(cfg: &RunConfig, map: &'a RffMap) -> Self {
        let standardizer = match &cfg.source {
            SourceConfig::Csv {
                standardize: true,
                standardize_exclusive,
                ..
            } => Some(RunningStandardizer::new(map.config().input_dim).exclusive(*standardize_exclusive)),
            _ => None,
        };
        Embedder { map, standardizer }
    }

    pub fn embed(&mut self, event: &StreamEvent) -> Result<FeatureVector> {
        let data_err = |e: Error| Error::Data {
            row: event.index as usize + 1,
            message: e.to_string(),
        };
        match &mut self.standardizer {
            Some(s) => {
                let x = s.standardize(&event.x_raw).map_err(data_err)?;
                self.map.embed(&x).map_err(data_err)
            }
            None => self.map.embed(&event.x_raw).map_err(data_err),
        }
    }

    pub fn embed_all(&mut self, events: &[StreamEvent]) -> Result<Vec<FeatureVector>> {
        events.iter().map(|e| self.embed(e)).collect()
    }
}

/// Outcome of one repetition.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub seeds: RunSeeds,
    pub trace: MetricTrace,
    pub final_state: ModelState,
    pub rff: RffConfig,
    /// Threshold used by SONARC.
    pub threshold: Option<f64>,
    /// Stream positions where the phase changes (synthetic sources).
    pub changepoints: Vec<usize>,
}

impl RunResult {
    pub fn restart_log(&self) -> Vec<u64> {
        self.trace.restart_indices()
    }

    pub fn snapshot(&self, cfg: &RunConfig) -> Snapshot {
        Snapshot::new(cfg.algorithm.name(), self.final_state.clone(), cfg.params(), self.rff)
    }
}

enum Learner {
    Single { state: ModelState, ocsvm: bool },
    Ensemble { ens: Box<CpdEnsemble>, cfg: CpdConfig },
    Oracle { state: ModelState, resets: Vec<bool> },
}

impl Learner {
    fn decision_state(&self) -> &ModelState {
        match self {
            Learner::Single { state, .. } | Learner::Oracle { state, .. } => state,
            Learner::Ensemble { ens, .. } => ens.decision_state(),
        }
    }

    fn into_state(self) -> ModelState {
        match self {
            Learner::Single { state, .. } | Learner::Oracle { state, .. } => state,
            Learner::Ensemble { ens, .. } => ens.decision_state().clone(),
        }
    }
}

fn cpd_config(cfg: &RunConfig, horizon: u64, threshold: f64) -> CpdConfig {
    CpdConfig {
        horizon: cfg.cpd.horizon.unwrap_or(horizon).max(2),
        lambda: cfg.lambda,
        delta: cfg.cpd_delta(),
        threshold,
        reference: cfg.cpd.reference,
    }
}

fn tune_on(cfg: &RunConfig, streams: &[Vec<FeatureVector>], horizon: u64) -> Result<TuneReport> {
    let template = cpd_config(cfg, horizon, 1.0);
    tune_threshold(streams, &template, &cfg.params(), &cfg.cpd.grid, cfg.cpd.tune_mode)
}

/// Stationary calibration streams: each is one phase of an independently
/// seeded preset, stretched to `horizon` points.
pub fn calibration_streams(cfg: &RunConfig, horizon: usize) -> Result<Vec<Vec<FeatureVector>>> {
    let SourceConfig::Preset { name } = &cfg.source else {
        return Err(Error::config("phase calibration requires a preset source"));
    };
    (0..cfg.cpd.calibration_runs)
        .into_par_iter()
        .map(|k| {
            let seeds = calibration_seeds(cfg, k);
            let phases = preset(name, seeds.stream_seed)?;
            let phase = PhaseSpec {
                length: horizon,
                seed: seeds.stream_seed,
                ..phases[k % phases.len()].clone()
            };
            let map = build_map(cfg, phase.dim(), seeds.rff_seed)?;
            generate(vec![phase])?.map(|e| map.embed(&e.x_raw)).collect()
        })
        .collect()
}

/// Tunes the SONARC threshold on stationary calibration streams of the preset.
pub fn tune_cpd(cfg: &RunConfig) -> Result<TuneReport> {
    let SourceConfig::Preset { name } = &cfg.source else {
        return Err(Error::config("phase calibration requires a preset source"));
    };
    let horizon: usize = preset(name, 0)?.iter().map(|p| p.length).sum();
    let streams = calibration_streams(cfg, horizon)?;
    tune_on(cfg, &streams, horizon as u64)
}

/// Runs one repetition. `threshold` overrides tuning for SONARC.
pub fn run_single(cfg: &RunConfig, run: usize, threshold: Option<f64>) -> Result<RunResult> {
    let seeds = run_seeds(cfg, run);
    let events = load_events(cfg, &seeds)?;
    run_on_events(cfg, seeds, &events, threshold)
}

pub fn run_on_events(
    cfg: &RunConfig,
    seeds: RunSeeds,
    events: &[StreamEvent],
    threshold: Option<f64>,
) -> Result<RunResult> {
    let input_dim = events.first().map_or(1, |e| e.x_raw.len());
    let map = build_map(cfg, input_dim, seeds.rff_seed)?;
    let dim = map.feature_dim();
    let params = cfg.params();
    let positions: Vec<usize> = phase_changepoints(events).iter().map(|&i| i as usize).collect();
    let n = events.len();

    let mut used_threshold = None;
    let mut learner = match cfg.algorithm {
        Algorithm::Sonar | Algorithm::SgdOcsvm => Learner::Single {
            state: ModelState::from_params(dim, &params, cfg.schedule().build()?)?,
            ocsvm: cfg.algorithm == Algorithm::SgdOcsvm,
        },
        Algorithm::OracleRestart => {
            let cps = cfg.cpd.changepoints.clone().unwrap_or_else(|| positions.clone());
            if let Some(bad) = cps.iter().find(|&&c| c >= n) {
                return Err(Error::input(format!("changepoint {bad} outside stream of length {n}")));
            }
            let mut resets = vec![false; n];
            cps.iter().for_each(|&c| resets[c] = true);
            Learner::Oracle {
                state: ModelState::from_params(dim, &params, cfg.schedule().build()?)?,
                resets,
            }
        }
        Algorithm::Sonarc => {
            let c = match (cfg.cpd.threshold, threshold) {
                (Some(c), _) | (None, Some(c)) => c,
                (None, None) => match cfg.calibration() {
                    Calibration::Data => {
                        let xs = Embedder::new(cfg, &map).embed_all(events)?;
                        tune_on(cfg, &[xs], n as u64)?.threshold
                    }
                    Calibration::Phases => tune_cpd(cfg)?.threshold,
                },
            };
            used_threshold = Some(c);
            let ccfg = cpd_config(cfg, n as u64, c);
            let reporter = cfg.cpd.reporter.map(|r| r.build()).transpose()?;
            Learner::Ensemble {
                ens: Box::new(CpdEnsemble::with_reporter(dim, &ccfg, params.clone(), reporter)?),
                cfg: ccfg,
            }
        }
    };

    let mut embedder = Embedder::new(cfg, &map);
    let mut trace = MetricTrace::with_capacity(n);
    for (k, event) in events.iter().enumerate() {
        let x = embedder.embed(event)?;
        let decision: Decision = learner.decision_state().classify(&x, params.epsilon);
        let train = cfg.train_on_outliers || event.label != Some(Label::Outlier);
        let mut restarted = false;
        match &mut learner {
            Learner::Single { state, ocsvm } => {
                if train {
                    if *ocsvm {
                        sgd_ocsvm::step_ocsvm(state, &x, &params)?;
                    } else {
                        sonar::step(state, &x, &params)?;
                    }
                }
            }
            Learner::Oracle { state, resets } => {
                if resets[k] {
                    state.reset_schedule();
                    restarted = true;
                }
                if train {
                    sonar::step(state, &x, &params)?;
                }
            }
            Learner::Ensemble { ens, cfg } => {
                if train {
                    restarted = ens.step(&x, cfg)?.restarted;
                }
            }
        }
        trace.record(
            event.index,
            event.label,
            decision,
            learner.decision_state().margin(),
            restarted,
        );
    }
    Ok(RunResult {
        seeds,
        trace,
        final_state: learner.into_state(),
        rff: *map.config(),
        threshold: used_threshold,
        changepoints: positions,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<RunResult>,
    pub aggregate: AggregateTrace,
    pub feature_dim: usize,
    pub tuning: Option<TuneReport>,
}

impl ExperimentResult {
    pub fn mean_restarts(&self) -> f64 {
        self.runs.iter().map(|r| r.trace.restart_count() as f64).sum::<f64>() / self.runs.len() as f64
    }

    /// Mean over runs of the Type I error on the second half of each stream.
    pub fn mean_tail_type1(&self) -> f64 {
        mean(self.runs.iter().filter_map(|r| r.trace.tail_type1()))
    }

    pub fn mean_final_type1(&self) -> f64 {
        mean(self.runs.iter().filter_map(|r| r.trace.final_type1()))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = it.collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("workers: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Executes `cfg.runs` seeded repetitions in parallel and writes the output
/// directory when one is configured.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    with_pool(cfg.workers, || -> Result<ExperimentResult> {
        let csv_events = match &cfg.source {
            SourceConfig::Csv { .. } => Some(load_events(cfg, &run_seeds(cfg, 0))?),
            SourceConfig::Preset { .. } => None,
        };
        let tuning = match (cfg.algorithm, cfg.cpd.threshold, cfg.calibration()) {
            (Algorithm::Sonarc, None, Calibration::Phases) => Some(tune_cpd(cfg)?),
            _ => None,
        };
        let threshold = tuning.as_ref().map(|t| t.threshold);
        let runs: Vec<RunResult> = (0..cfg.runs)
            .into_par_iter()
            .map(|r| match &csv_events {
                Some(ev) => run_on_events(cfg, run_seeds(cfg, r), ev, threshold),
                None => run_single(cfg, r, threshold),
            })
            .collect::<Result<_>>()?;
        let traces: Vec<MetricTrace> = runs.iter().map(|r| r.trace.clone()).collect();
        let aggregate = metrics::aggregate(&traces)?;
        let feature_dim = runs[0].rff.feature_dim();
        let result = ExperimentResult {
            runs,
            aggregate,
            feature_dim,
            tuning,
        };
        if let Some(dir) = &cfg.output {
            write_outputs(cfg, &result, dir)?;
        }
        Ok(result)
    })?
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSidecar {
    pub algorithm: String,
    pub seeds: RunSeeds,
    pub rff: RffConfig,
    pub params: SonarParams,
    pub smoothing_window: usize,
    pub threshold: Option<f64>,
    pub detected_changes: Vec<u64>,
    pub phase_changepoints: Vec<usize>,
    pub final_type1: Option<f64>,
    pub final_type2: Option<f64>,
    pub tail_type1: Option<f64>,
    pub conventions: Conventions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conventions {
    pub decision: String,
    pub unlabeled_events: String,
    pub margin_undefined: String,
    pub f1_positive_class: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            decision: "outlier iff <w, z(x)> < rho (1 - epsilon), evaluated before the update".into(),
            unlabeled_events: "counted as normal".into(),
            margin_undefined: "empty cell when |w| <= 1e-12".into(),
            f1_positive_class: "outlier".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub library_version: String,
    pub config: RunConfig,
    pub feature_dim: usize,
    pub tuning: Option<TuneReport>,
    pub runs: Vec<RunSeeds>,
    pub mean_restarts: f64,
    pub mean_final_type1: f64,
    pub mean_tail_type1: f64,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn write_outputs(cfg: &RunConfig, result: &ExperimentResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in &result.runs {
        let id = r.seeds.run;
        metrics::write_trace_csv(dir.join(format!("run_{id:03}.csv")), &r.trace)?;
        let sidecar = RunSidecar {
            algorithm: cfg.algorithm.name().into(),
            seeds: r.seeds,
            rff: r.rff,
            params: cfg.params(),
            smoothing_window: cfg.smoothing_window,
            threshold: r.threshold,
            detected_changes: r.restart_log(),
            phase_changepoints: r.changepoints.clone(),
            final_type1: r.trace.final_type1(),
            final_type2: r.trace.final_type2(),
            tail_type1: r.trace.tail_type1(),
            conventions: Conventions::default(),
        };
        std::fs::write(
            dir.join(format!("run_{id:03}.json")),
            serde_json::to_string_pretty(&sidecar)?,
        )?;
        r.snapshot(cfg).save(dir.join(format!("state_{id:03}.json")))?;
    }
    metrics::write_aggregate_csv(dir.join("aggregate.csv"), &result.aggregate)?;
    let smoothed = metrics::smooth_defined(&result.aggregate.margin.mean, cfg.smoothing_window)?;
    let mut text = String::from("index,margin_mean_smoothed\n");
    for (i, m) in result.aggregate.index.iter().zip(smoothed) {
        text.push_str(&format!("{i},{}\n", m.map(|v| format!("{v:?}")).unwrap_or_default()));
    }
    std::fs::write(dir.join("aggregate_smoothed.csv"), text)?;
    let manifest = Manifest {
        library_version: env!("CARGO_PKG_VERSION").into(),
        config: RunConfig {
            output: None,
            ..cfg.clone()
        },
        feature_dim: result.feature_dim,
        tuning: result.tuning.clone(),
        runs: result.runs.iter().map(|r| r.seeds).collect(),
        mean_restarts: result.mean_restarts(),
        mean_final_type1: result.mean_final_type1(),
        mean_tail_type1: result.mean_tail_type1(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
