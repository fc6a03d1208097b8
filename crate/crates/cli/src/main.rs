//! `qcll`: train, evaluate and run experiment suites for sketched and
//! statevector circuit learners.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qcll_core::data::{ColumnRef, TargetFn, TaskKind};
use qcll_core::experiments::{
    BenchmarkConfig, BenchmarkSource, ClassificationConfig, CoverageConfig, ModelKind, ModelSettings, RegressionConfig,
};
use qcll_core::optimize::{OptimizerKind, TrainConfig};
use qcll_core::qcll::Variant;

use commands::{Experiment, ExperimentRun};
use config::{read_json, DataSource, RunConfig};

#[derive(Parser)]
#[command(name = "qcll", version, about = "Circuit-like learning with count sketches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write config.json, model.json, trace.csv and metrics.json.
    Train(TrainArgs),
    /// Score a saved model on a dataset.
    Eval(EvalArgs),
    /// Run an experiment suite and write config.json, results.csv and metrics.json.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct RunFlags {
    /// JSON file with the base configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: runs/<command>-<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct DataFlags {
    /// Synthetic task when no --data file is given.
    #[arg(long)]
    task: Option<TaskKind>,
    /// Regression target: x2, exp, sin or abs.
    #[arg(long = "fn")]
    function: Option<TargetFn>,
    /// Regression sample count.
    #[arg(long)]
    n: Option<usize>,
    /// Regression noise level.
    #[arg(long)]
    sigma: Option<f64>,
    /// Classification samples per class.
    #[arg(long)]
    per_class: Option<usize>,
    /// CSV file with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column of --data, by name or 0-based index.
    #[arg(long)]
    target: Option<ColumnRef>,
}

impl DataFlags {
    fn apply(&self, base: DataSource) -> Result<DataSource> {
        if let Some(path) = &self.data {
            let (old_target, old_task) = match &base {
                DataSource::File { target, task, .. } => (Some(target.clone()), Some(*task)),
                _ => (None, None),
            };
            let Some(target) = self.target.clone().or(old_target) else {
                bail!("--data needs --target <column>");
            };
            let task = self.task.or(old_task).unwrap_or(TaskKind::Regression);
            return Ok(DataSource::File {
                path: path.clone(),
                target,
                task,
            });
        }
        let task = self.task.unwrap_or(base.task());
        let mut source = match (&base, task) {
            (DataSource::File { .. }, _) if self.task.is_none() => base,
            (DataSource::Regression { .. }, TaskKind::Regression)
            | (DataSource::Classification { .. }, TaskKind::Classification) => base,
            (_, TaskKind::Regression) => DataSource::default(),
            (_, TaskKind::Classification) => DataSource::Classification { per_class: 100 },
        };
        match &mut source {
            DataSource::Regression { function, n, sigma } => {
                *function = self.function.unwrap_or(*function);
                *n = self.n.unwrap_or(*n);
                *sigma = self.sigma.unwrap_or(*sigma);
                if self.per_class.is_some() {
                    bail!("--per-class applies to classification data only");
                }
            }
            DataSource::Classification { per_class } => {
                *per_class = self.per_class.unwrap_or(*per_class);
                if self.function.is_some() || self.n.is_some() || self.sigma.is_some() {
                    bail!("--fn, --n and --sigma apply to regression data only");
                }
            }
            DataSource::File { target, .. } => {
                if let Some(t) = &self.target {
                    *target = t.clone();
                }
            }
        }
        Ok(source)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerName {
    Adam,
    Lbfgs,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    optimizer: Option<OptimizerName>,
    /// Adam step size.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// L-BFGS history length.
    #[arg(long)]
    memory: Option<usize>,
    /// Iterations per restart.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
}

impl TrainFlags {
    fn apply(&self, train: &mut TrainConfig) {
        let (lr, mem) = match train.optimizer {
            OptimizerKind::Adam { learning_rate } => (learning_rate, 10),
            OptimizerKind::Lbfgs { memory } => (0.1, memory),
        };
        let name = self.optimizer.unwrap_or(match train.optimizer {
            OptimizerKind::Adam { .. } => OptimizerName::Adam,
            OptimizerKind::Lbfgs { .. } => OptimizerName::Lbfgs,
        });
        train.optimizer = match name {
            OptimizerName::Adam => OptimizerKind::Adam {
                learning_rate: self.learning_rate.unwrap_or(lr),
            },
            OptimizerName::Lbfgs => OptimizerKind::Lbfgs {
                memory: self.memory.unwrap_or(mem),
            },
        };
        if let Some(i) = self.iterations {
            train.max_iterations = i;
        }
        if let Some(r) = self.restarts {
            train.restarts = r;
        }
    }
}

#[derive(Args)]
struct ModelFlags {
    /// Qubits per input dimension (Q_d).
    #[arg(long)]
    qubits: Option<usize>,
    /// Circuit depth M.
    #[arg(long)]
    depth: Option<usize>,
    /// Sketched angle count P (default Q·M).
    #[arg(long)]
    theta_len: Option<usize>,
    /// Sketched output count I.
    #[arg(long)]
    outputs: Option<usize>,
    /// Sketch width K′.
    #[arg(long)]
    sketch_dim: Option<usize>,
    #[arg(long)]
    variant: Option<Variant>,
    #[command(flatten)]
    train: TrainFlags,
}

impl ModelFlags {
    fn apply(&self, s: &mut ModelSettings) {
        if let Some(q) = self.qubits {
            s.qubits_per_dim = q;
        }
        if let Some(d) = self.depth {
            s.depth = d;
        }
        if self.theta_len.is_some() {
            s.theta_len = self.theta_len;
        }
        if self.outputs.is_some() {
            s.outputs = self.outputs;
        }
        if let Some(k) = self.sketch_dim {
            s.sketch_dim = k;
        }
        if let Some(v) = self.variant {
            s.variant = v;
        }
        self.train.apply(&mut s.train);
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunFlags,
    /// qcl, qcll or baseline.
    #[arg(long)]
    model: Option<ModelKind>,
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    settings: ModelFlags,
}

#[derive(Args)]
struct EvalArgs {
    /// Saved model (model.json of a train run).
    #[arg(long)]
    model: PathBuf,
    /// Run configuration whose data section (and seed) to evaluate on.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for predictions.csv and metrics.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    data: DataFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Regression,
    Classification,
    Noise,
    Samplesize,
    Benchmark,
    Coverage,
}

#[derive(Args)]
struct ExperimentArgs {
    suite: Suite,
    #[command(flatten)]
    run: RunFlags,
    /// Models to compare (comma-separated).
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    /// Repetitions (regression and classification suites).
    #[arg(long)]
    seeds: Option<usize>,
    /// Target functions (comma-separated).
    #[arg(long = "fns", value_delimiter = ',')]
    functions: Option<Vec<TargetFn>>,
    /// Training-set sizes (comma-separated).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Noise levels (comma-separated).
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    /// Evaluation grid points.
    #[arg(long)]
    grid: Option<usize>,
    /// Classification samples per class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Qubits: per input dimension, or the list of circuit sizes for coverage.
    #[arg(long, value_delimiter = ',')]
    qubits: Option<Vec<usize>>,
    /// Depth, or the list of depths for coverage.
    #[arg(long = "depth", alias = "depths", value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    /// Coverage repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// Coverage thresholds (comma-separated).
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    sketch_dim: Option<usize>,
    #[arg(long)]
    variant: Option<Variant>,
    /// Benchmark CSV file (replaces the configured datasets).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Target column of --dataset.
    #[arg(long)]
    target: Option<ColumnRef>,
    /// Task of --dataset.
    #[arg(long)]
    task: Option<TaskKind>,
    /// Training percentages (comma-separated).
    #[arg(long, value_delimiter = ',')]
    percentages: Option<Vec<u32>>,
    /// Use only the first this-many feature pairs.
    #[arg(long)]
    max_pairs: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
}

fn single(values: &Option<Vec<usize>>, flag: &str, suite: &str) -> Result<Option<usize>> {
    match values.as_deref() {
        None => Ok(None),
        Some([v]) => Ok(Some(*v)),
        Some(_) => bail!("--{flag} takes a single value for the {suite} suite"),
    }
}

impl ExperimentArgs {
    fn reject(&self, allowed: &[&str], suite: &str) -> Result<()> {
        let given = [
            ("seeds", self.seeds.is_some()),
            ("fns", self.functions.is_some()),
            ("sizes", self.sizes.is_some()),
            ("sigmas", self.sigmas.is_some()),
            ("grid", self.grid.is_some()),
            ("per-class", self.per_class.is_some()),
            ("reps", self.reps.is_some()),
            ("thresholds", self.thresholds.is_some()),
            ("dataset", self.dataset.is_some()),
            ("target", self.target.is_some()),
            ("task", self.task.is_some()),
            ("percentages", self.percentages.is_some()),
            ("max-pairs", self.max_pairs.is_some()),
            ("models", self.models.is_some()),
        ];
        for (flag, set) in given {
            if set && !allowed.contains(&flag) {
                bail!("--{flag} does not apply to the {suite} suite");
            }
        }
        Ok(())
    }

    fn settings(&self, s: &mut ModelSettings, suite: &str) -> Result<()> {
        if let Some(q) = single(&self.qubits, "qubits", suite)? {
            s.qubits_per_dim = q;
        }
        if let Some(d) = single(&self.depths, "depth", suite)? {
            s.depth = d;
        }
        if let Some(k) = self.sketch_dim {
            s.sketch_dim = k;
        }
        if let Some(v) = self.variant {
            s.variant = v;
        }
        self.train.apply(&mut s.train);
        Ok(())
    }

    fn regression(&self, mut c: RegressionConfig, suite: &str) -> Result<RegressionConfig> {
        self.reject(&["seeds", "fns", "sizes", "sigmas", "grid", "models"], suite)?;
        if let Some(v) = &self.functions {
            c.functions = v.clone();
        }
        if let Some(v) = &self.sizes {
            c.sizes = v.clone();
        }
        if let Some(v) = &self.sigmas {
            c.sigmas = v.clone();
        }
        if let Some(v) = &self.models {
            c.models = v.clone();
        }
        if let Some(v) = self.seeds {
            c.seeds = v;
        }
        if let Some(v) = self.grid {
            c.grid = v;
        }
        self.settings(&mut c.settings, suite)?;
        c.validate()?;
        Ok(c)
    }

    fn resolve(&self, base: Option<Experiment>) -> Result<Experiment> {
        let suite = match self.suite {
            Suite::Regression => "regression",
            Suite::Classification => "classification",
            Suite::Noise => "noise",
            Suite::Samplesize => "samplesize",
            Suite::Benchmark => "benchmark",
            Suite::Coverage => "coverage",
        };
        if let Some(b) = &base {
            if b.name() != suite {
                bail!("config file describes the {} suite, not {suite}", b.name());
            }
        }
        Ok(match self.suite {
            Suite::Regression | Suite::Noise | Suite::Samplesize => {
                let preset = match (base, self.suite) {
                    (Some(Experiment::Regression(c) | Experiment::Noise(c) | Experiment::Samplesize(c)), _) => c,
                    (_, Suite::Noise) => RegressionConfig::noise(),
                    (_, Suite::Samplesize) => RegressionConfig::sample_size(),
                    _ => RegressionConfig::default(),
                };
                let c = self.regression(preset, suite)?;
                match self.suite {
                    Suite::Noise => Experiment::Noise(c),
                    Suite::Samplesize => Experiment::Samplesize(c),
                    _ => Experiment::Regression(c),
                }
            }
            Suite::Classification => {
                self.reject(&["seeds", "per-class", "models"], suite)?;
                let mut c = match base {
                    Some(Experiment::Classification(c)) => c,
                    _ => ClassificationConfig::default(),
                };
                if let Some(v) = self.per_class {
                    c.per_class = v;
                }
                if let Some(v) = self.seeds {
                    c.seeds = v;
                }
                if let Some(v) = &self.models {
                    c.models = v.clone();
                }
                self.settings(&mut c.settings, suite)?;
                c.validate()?;
                Experiment::Classification(c)
            }
            Suite::Benchmark => {
                self.reject(
                    &["dataset", "target", "task", "percentages", "max-pairs", "models"],
                    suite,
                )?;
                let mut c = match base {
                    Some(Experiment::Benchmark(c)) => c,
                    _ => BenchmarkConfig::default(),
                };
                if let Some(path) = &self.dataset {
                    let Some(target) = self.target.clone() else {
                        bail!("--dataset needs --target <column>");
                    };
                    let name = path
                        .file_stem()
                        .map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
                    c.datasets = vec![BenchmarkSource {
                        name,
                        path: path.clone(),
                        target,
                        kind: self.task.unwrap_or(TaskKind::Regression),
                    }];
                }
                for d in &c.datasets {
                    if !d.path.is_file() {
                        bail!("dataset file {} does not exist", d.path.display());
                    }
                }
                if let Some(v) = &self.percentages {
                    c.percentages = v.clone();
                }
                if self.max_pairs.is_some() {
                    c.max_pairs = self.max_pairs;
                }
                if let Some(v) = &self.models {
                    c.models = v.clone();
                }
                self.settings(&mut c.settings, suite)?;
                c.validate()?;
                Experiment::Benchmark(c)
            }
            Suite::Coverage => {
                self.reject(&["reps", "thresholds", "grid"], suite)?;
                let mut c = match base {
                    Some(Experiment::Coverage(c)) => c,
                    _ => CoverageConfig::default(),
                };
                if let Some(v) = &self.qubits {
                    c.qubits = v.clone();
                }
                if let Some(v) = &self.depths {
                    c.depths = v.clone();
                }
                if let Some(v) = self.reps {
                    c.repetitions = v;
                }
                if let Some(v) = &self.thresholds {
                    c.thresholds = v.clone();
                }
                if let Some(v) = self.grid {
                    c.grid = v;
                }
                if let Some(k) = self.sketch_dim {
                    c.sketch_dim = k;
                }
                if let Some(v) = self.variant {
                    c.variant = v;
                }
                self.train.apply(&mut c.train);
                c.validate()?;
                Experiment::Coverage(c)
            }
        })
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let mut config: RunConfig = match &args.run.config {
                Some(path) => read_json(path)?,
                None => RunConfig::default(),
            };
            if let Some(seed) = args.run.seed {
                config.seed = seed;
            }
            if let Some(m) = args.model {
                config.model = m;
            }
            config.data = args.data.apply(config.data)?;
            args.settings.apply(&mut config.settings);
            config.validate()?;
            let out = args
                .run
                .out
                .unwrap_or_else(|| commands::default_out("train", config.seed));
            let metrics = commands::train(&config, &out, args.run.force)?;
            println!("{}", serde_json::to_string(&metrics)?);
        }
        Command::Eval(args) => {
            let base: RunConfig = match &args.config {
                Some(path) => read_json(path)?,
                None => RunConfig::default(),
            };
            let seed = args.seed.unwrap_or(base.seed);
            let data = args.data.apply(base.data)?;
            let evaluation = commands::eval(&args.model, &data, seed, args.out.as_deref(), args.force)?;
            println!("{}", serde_json::to_string(&evaluation)?);
        }
        Command::Experiment(args) => {
            let base: Option<ExperimentRun> = args.run.config.as_deref().map(read_json).transpose()?;
            let seed = args.run.seed.or(base.as_ref().map(|b| b.seed)).unwrap_or(0);
            let experiment = args.resolve(base.map(|b| b.experiment))?;
            let out = args
                .run
                .out
                .clone()
                .unwrap_or_else(|| commands::default_out(experiment.name(), seed));
            let run = ExperimentRun { seed, experiment };
            for row in commands::experiment(&run, args.run.workers, &out, args.run.force)? {
                println!(
                    "{}\t{}\t{}\t{:.6}\t{:.6}\t{}",
                    row.setting.suite, row.setting.model, row.metric, row.mean, row.std, row.count
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
