//! Experiment harness: configuration, seeded parallel repetitions, output
//! files, acceptance-region grids and offline evaluation.

mod config;
mod grid;
mod offline;
mod run;

pub use config::{
    decade_grid, Algorithm, Calibration, CpdSettings, RffSettings, RunConfig, ScheduleConfig, SourceConfig,
    DATASET_PRESETS, DEFAULT_GAMMA, DEFAULT_LAMBDA, DEFAULT_RUNS, DEFAULT_R_MIN, IOT_LAMBDA, SKAB_LAMBDA,
};
pub use grid::{acceptance_grid, disagreement, write_grid_csv, Grid};
pub use offline::{evaluate_snapshot, labeled_dataset};
pub use run::{
    build_map, calibration_streams, load_events, run_experiment, run_on_events, run_seeds, run_single, tune_cpd,
    write_outputs, Conventions, Embedder, ExperimentResult, Manifest, RunResult, RunSeeds, RunSidecar,
};
