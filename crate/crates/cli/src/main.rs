use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sonar::experiment::{
    acceptance_grid, build_map, evaluate_snapshot, run_experiment, run_single, tune_cpd, write_grid_csv, Algorithm,
    Calibration, Grid, Manifest, RunConfig, SourceConfig,
};
use sonar::learner::{ScheduleKind, Snapshot};
use sonar::sonarc::{CpdReference, TuneMode};
use sonar::streams::{export_csv, generate, ingest_csv, preset, ColumnSelector, CsvOptions};
use sonar::{sample_rff, Error};

#[derive(Parser)]
#[command(name = "sonar", version, about = "Streaming one-class novelty detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic preset stream to CSV.
    Generate {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run seeded repetitions and write metric files.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Fail with exit code 3 unless the mean second-half Type I error is at most this value.
        #[arg(long)]
        assert_tail_type1: Option<f64>,
        /// Fail with exit code 3 unless the mean restart count lies in `LO,HI`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        assert_restarts: Option<Vec<f64>>,
    },
    /// Select the changepoint threshold on stationary calibration streams.
    TuneCpd {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate a saved final state on a labeled CSV file.
    EvalOffline {
        #[arg(long)]
        snapshot: PathBuf,
        #[command(flatten)]
        csv: CsvArgs,
        #[arg(long)]
        no_standardize: bool,
    },
    /// Classify a 2-D grid with a saved state or a freshly trained run.
    GridExport {
        #[command(flatten)]
        config: ConfigArgs,
        /// Use this saved state instead of training.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        run_index: usize,
        /// `x_min,x_max,y_min,y_max,nx,ny`
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Default)]
struct CsvArgs {
    /// CSV input path.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    delimiter: Option<char>,
    /// Feature columns by name or zero-based index (default: all but label and excluded).
    #[arg(long, value_delimiter = ',')]
    feature_columns: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    exclude_columns: Option<Vec<String>>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long, value_delimiter = ',')]
    normal_values: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    outlier_values: Option<Vec<String>>,
}

impl CsvArgs {
    fn apply(&self, options: &mut CsvOptions) {
        if let Some(d) = self.delimiter {
            options.delimiter = d;
        }
        let sel = |v: &Vec<String>| v.iter().map(|s| ColumnSelector::from(s.as_str())).collect();
        if let Some(v) = &self.feature_columns {
            options.feature_columns = sel(v);
        }
        if let Some(v) = &self.exclude_columns {
            options.exclude_columns = sel(v);
        }
        if let Some(l) = &self.label_column {
            options.label_column = Some(ColumnSelector::from(l.as_str()));
        }
        if let Some(v) = &self.normal_values {
            options.label_mapping.normal = v.clone();
        }
        if let Some(v) = &self.outlier_values {
            options.label_mapping.outlier = v.clone();
        }
    }

    fn options(&self) -> CsvOptions {
        let mut o = CsvOptions::default();
        self.apply(&mut o);
        o
    }
}

/// Flags mirroring the config file; flags override file values.
#[derive(Args)]
struct ConfigArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reproduce a previous run from its manifest.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Start from a dataset preset (skab, iot); requires --csv.
    #[arg(long)]
    dataset_preset: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    base_rate: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    rff_delta: Option<f64>,
    #[arg(long)]
    rff_dim: Option<usize>,
    #[arg(long)]
    rff_seed: Option<u64>,
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    csv: CsvArgs,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    standardize_exclusive: bool,
    #[arg(long)]
    train_on_outliers: bool,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    smoothing_window: Option<usize>,
    #[arg(long)]
    cpd_threshold: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    cpd_grid: Option<Vec<f64>>,
    /// no_trigger or detect_one
    #[arg(long)]
    cpd_mode: Option<String>,
    #[arg(long)]
    cpd_delta: Option<f64>,
    #[arg(long)]
    cpd_horizon: Option<u64>,
    /// main or slowest_base
    #[arg(long)]
    cpd_reference: Option<String>,
    /// phases or data
    #[arg(long)]
    cpd_calibration: Option<String>,
    #[arg(long)]
    cpd_calibration_runs: Option<usize>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(field: &str, value: &str) -> Result<T, Error> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::Config(format!("{field}: invalid value `{value}`")))
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = if let Some(path) = &self.manifest {
            Manifest::load(path)?.config
        } else if let Some(path) = &self.config {
            RunConfig::from_toml_file(path)?
        } else if let Some(name) = &self.dataset_preset {
            let path = self
                .csv
                .csv
                .clone()
                .ok_or_else(|| Error::Config("--dataset-preset requires --csv".into()))?;
            RunConfig::dataset_preset(name, path)?
        } else {
            RunConfig::defaults()
        };
        if let Some(a) = &self.algorithm {
            cfg.algorithm = a.parse::<Algorithm>()?;
        }
        set(&mut cfg.lambda, self.lambda);
        set(&mut cfg.epsilon, self.epsilon);
        if self.schedule.is_some() || self.base_rate.is_some() {
            let mut s = cfg.schedule();
            if let Some(k) = &self.schedule {
                s.kind = k.parse::<ScheduleKind>()?;
            }
            set(&mut s.base_rate, self.base_rate);
            cfg.schedule = Some(s);
        }
        set(&mut cfg.rff.gamma, self.gamma);
        set(&mut cfg.rff.r_min, self.r_min);
        if self.rff_delta.is_some() {
            cfg.rff.delta = self.rff_delta;
        }
        if self.rff_dim.is_some() {
            cfg.rff.dim = self.rff_dim;
        }
        if self.rff_seed.is_some() {
            cfg.rff.seed = self.rff_seed;
        }
        if let Some(p) = &self.preset {
            cfg.source = SourceConfig::preset(p);
        }
        if let Some(new_path) = &self.csv.csv {
            match &mut cfg.source {
                SourceConfig::Csv { path, .. } => *path = new_path.clone(),
                source => *source = SourceConfig::csv(new_path, CsvOptions::default()),
            }
        }
        if let SourceConfig::Csv {
            options,
            standardize,
            standardize_exclusive,
            ..
        } = &mut cfg.source
        {
            self.csv.apply(options);
            if self.no_standardize {
                *standardize = false;
            }
            if self.standardize_exclusive {
                *standardize_exclusive = true;
            }
        }
        cfg.train_on_outliers |= self.train_on_outliers;
        set(&mut cfg.runs, self.runs);
        set(&mut cfg.seed, self.seed);
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        set(&mut cfg.smoothing_window, self.smoothing_window);
        if self.cpd_threshold.is_some() {
            cfg.cpd.threshold = self.cpd_threshold;
        }
        if let Some(g) = &self.cpd_grid {
            cfg.cpd.grid = g.clone();
        }
        if let Some(m) = &self.cpd_mode {
            cfg.cpd.tune_mode = parse_enum::<TuneMode>("cpd_mode", m)?;
        }
        if self.cpd_delta.is_some() {
            cfg.cpd.delta = self.cpd_delta;
        }
        if self.cpd_horizon.is_some() {
            cfg.cpd.horizon = self.cpd_horizon;
        }
        if let Some(r) = &self.cpd_reference {
            cfg.cpd.reference = parse_enum::<CpdReference>("cpd_reference", r)?;
        }
        if let Some(c) = &self.cpd_calibration {
            cfg.cpd.calibration = Some(parse_enum::<Calibration>("cpd_calibration", c)?);
        }
        set(&mut cfg.cpd.calibration_runs, self.cpd_calibration_runs);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T: Copy>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

enum Failure {
    Error(Error),
    Assert(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Toml(_) | Error::Json(_) | Error::Tuning { .. } => 1,
        Error::Input(_) | Error::Data { .. } | Error::Diverged { .. } | Error::Io(_) | Error::Csv(_) => 2,
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate {
            preset: name,
            seed,
            out,
        } => {
            let events: Vec<_> = generate(preset(&name, seed)?)?.collect();
            export_csv(&out, &events)?;
            eprintln!("wrote {} events to {}", events.len(), out.display());
        }
        Command::Run {
            config,
            assert_tail_type1,
            assert_restarts,
        } => {
            let cfg = config.resolve()?;
            let result = run_experiment(&cfg)?;
            let summary = serde_json::json!({
                "algorithm": cfg.algorithm.name(),
                "runs": result.runs.len(),
                "feature_dim": result.feature_dim,
                "threshold": result.runs[0].threshold,
                "mean_restarts": result.mean_restarts(),
                "restarts": result.runs.iter().map(|r| r.trace.restart_count()).collect::<Vec<_>>(),
                "mean_final_type1": result.mean_final_type1(),
                "mean_tail_type1": result.mean_tail_type1(),
                "output": cfg.output,
            });
            print_json(&summary)?;
            if let Some(limit) = assert_tail_type1 {
                let v = result.mean_tail_type1();
                if v > limit {
                    return Err(Failure::Assert(format!(
                        "mean second-half Type I error {v} exceeds {limit}"
                    )));
                }
            }
            if let Some(range) = assert_restarts {
                if range.len() != 2 {
                    return Err(Error::Config("--assert-restarts takes LO,HI".into()).into());
                }
                let v = result.mean_restarts();
                if v < range[0] || v > range[1] {
                    return Err(Failure::Assert(format!(
                        "mean restarts {v} outside [{}, {}]",
                        range[0], range[1]
                    )));
                }
            }
        }
        Command::TuneCpd { config } => {
            let mut cfg = config.resolve()?;
            cfg.algorithm = Algorithm::Sonarc;
            print_json(&tune_cpd(&cfg)?)?;
        }
        Command::EvalOffline {
            snapshot,
            csv,
            no_standardize,
        } => {
            let snap = Snapshot::load(&snapshot)?;
            let path = csv
                .csv
                .clone()
                .ok_or_else(|| Error::Config("--csv is required".into()))?;
            let events = ingest_csv(path, &csv.options())?;
            print_json(&evaluate_snapshot(&snap, &events, !no_standardize)?)?;
        }
        Command::GridExport {
            config,
            snapshot,
            run_index,
            grid,
            out,
        } => {
            let grid = match grid {
                Some(g) if g.len() != 6 => {
                    return Err(Error::Config("--grid takes x_min,x_max,y_min,y_max,nx,ny".into()).into());
                }
                Some(g) => Grid {
                    x_min: g[0],
                    x_max: g[1],
                    y_min: g[2],
                    y_max: g[3],
                    nx: g[4] as usize,
                    ny: g[5] as usize,
                },
                None => Grid::default(),
            };
            let (state, map, epsilon) = match snapshot {
                Some(path) => {
                    let snap = Snapshot::load(path)?;
                    (snap.state, sample_rff(snap.rff)?, snap.params.epsilon)
                }
                None => {
                    let cfg = config.resolve()?;
                    let r = run_single(&cfg, run_index, None)?;
                    let map = build_map(&cfg, r.rff.input_dim, r.rff.seed)?;
                    (r.final_state, map, cfg.epsilon)
                }
            };
            let decisions = acceptance_grid(&state, &map, epsilon, &grid)?;
            write_grid_csv(&out, &grid, &decisions)?;
            eprintln!("wrote {} cells to {}", decisions.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Assert(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(3)
        }
    }
}
