use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

use qcll_core::data::{apply_scale, minmax_scale, Dataset, ScalingStats, TaskKind};
use qcll_core::experiments::{
    classification_error, fit_model, rmse, run_benchmark_suite, run_classification_suite, run_coverage,
    run_regression_suite, write_reports_csv, BenchmarkConfig, ClassificationConfig, CoverageConfig, MetricReport,
    ModelKind, Predictor, RegressionConfig, SavedModel, Setting,
};
use qcll_core::optimize::write_trace_csv;

use crate::config::{DataSource, RunConfig};

/// Contents of `model.json`: the model and, for file data, the feature scaling it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub model: SavedModel,
    pub scaling: Option<ScalingStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

/// Contents of `metrics.json` after `train`. Wall time is left out so that
/// reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub model: ModelKind,
    pub task: TaskKind,
    pub seed: u64,
    pub evaluation: Evaluation,
    pub final_cost: Option<f64>,
    pub initial_mse: Option<f64>,
    pub best_restart: Option<usize>,
    pub failed_restarts: Vec<usize>,
}

/// Creates `out`, refusing to reuse a non-empty directory unless `force`.
pub fn prepare_out(out: &Path, force: bool) -> Result<()> {
    if out.exists() {
        if !out.is_dir() {
            bail!("output path {} exists and is not a directory", out.display());
        }
        let occupied = std::fs::read_dir(out)?.next().is_some();
        if occupied && !force {
            bail!(
                "output directory {} is not empty; pass --force to overwrite",
                out.display()
            );
        }
    }
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn evaluate(predictor: &Predictor, data: &Dataset) -> Result<Evaluation> {
    if predictor.task() != data.kind {
        bail!(
            "model was trained for {:?} but the data is {:?}",
            predictor.task(),
            data.kind
        );
    }
    if predictor.input_dims() != data.dims() {
        bail!(
            "model expects {} features, data has {}",
            predictor.input_dims(),
            data.dims()
        );
    }
    Ok(match data.kind {
        TaskKind::Regression => {
            let e = rmse(&predictor.predict_values(&data.x)?, &data.y)?;
            Evaluation {
                samples: data.len(),
                mse: Some(e * e),
                rmse: Some(e),
                accuracy: None,
            }
        }
        TaskKind::Classification => {
            let truth: Vec<usize> = data.y.iter().map(|&y| y as usize).collect();
            let err = classification_error(&predictor.predict_labels(&data.x)?, &truth)?;
            Evaluation {
                samples: data.len(),
                mse: None,
                rmse: None,
                accuracy: Some(1.0 - err),
            }
        }
    })
}

pub fn train(config: &RunConfig, out: &Path, force: bool) -> Result<TrainMetrics> {
    config.validate()?;
    prepare_out(out, force)?;
    write_json(&out.join("config.json"), config)?;
    let raw = config.data.load(config.seed)?;
    let (data, scaling) = match config.data {
        DataSource::File { .. } => {
            let (scaled, stats) = minmax_scale(&raw)?;
            (scaled, Some(stats))
        }
        _ => (raw, None),
    };
    config.settings.validate(config.model, data.dims())?;
    info!(
        "training {} on {} samples with {} features",
        config.model.tag(),
        data.len(),
        data.dims()
    );
    let fitted = fit_model(config.model, &config.settings, &data, config.model_seed())?;
    write_json(
        &out.join("model.json"),
        &ModelFile {
            model: fitted.predictor.to_saved(),
            scaling,
        },
    )?;
    let training = fitted.training.as_ref();
    match training {
        Some(t) => write_trace_csv(t, create(&out.join("trace.csv"))?)?,
        None => std::fs::write(out.join("trace.csv"), "restart,iteration,cost\n")?,
    }
    let metrics = TrainMetrics {
        model: config.model,
        task: data.kind,
        seed: config.seed,
        evaluation: evaluate(&fitted.predictor, &data)?,
        final_cost: training.map(|t| t.cost),
        initial_mse: fitted.initial_mean_cost(data.len()),
        best_restart: training.map(|t| t.best_restart),
        failed_restarts: training
            .map(|t| {
                t.restarts
                    .iter()
                    .filter(|r| r.failure.is_some())
                    .map(|r| r.restart)
                    .collect()
            })
            .unwrap_or_default(),
    };
    write_json(&out.join("metrics.json"), &metrics)?;
    info!("wrote {}", out.display());
    Ok(metrics)
}

pub fn eval(model_path: &Path, data: &DataSource, seed: u64, out: Option<&Path>, force: bool) -> Result<Evaluation> {
    data.validate()?;
    let file: ModelFile = crate::config::read_json(model_path)?;
    let predictor = Predictor::from_saved(&file.model)?;
    let raw = data.load(seed)?;
    let data = match &file.scaling {
        Some(stats) => apply_scale(stats, &raw)?,
        None => raw,
    };
    let evaluation = evaluate(&predictor, &data)?;
    if let Some(out) = out {
        prepare_out(out, force)?;
        let mut w = csv::Writer::from_writer(create(&out.join("predictions.csv"))?);
        let mut header = data.feature_names.clone();
        header.extend(["target".to_string(), "prediction".to_string()]);
        w.write_record(&header)?;
        let predictions: Vec<f64> = match data.kind {
            TaskKind::Regression => predictor.predict_values(&data.x)?,
            TaskKind::Classification => predictor
                .predict_labels(&data.x)?
                .into_iter()
                .map(|c| c as f64)
                .collect(),
        };
        for ((x, y), p) in data.x.iter().zip(&data.y).zip(&predictions) {
            let mut row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            row.push(format!("{y:?}"));
            row.push(format!("{p:?}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        write_json(&out.join("metrics.json"), &evaluation)?;
    }
    Ok(evaluation)
}

/// One suite with its resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", content = "config", rename_all = "snake_case")]
pub enum Experiment {
    Regression(RegressionConfig),
    Samplesize(RegressionConfig),
    Noise(RegressionConfig),
    Classification(ClassificationConfig),
    Benchmark(BenchmarkConfig),
    Coverage(CoverageConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Regression(_) => "regression",
            Self::Samplesize(_) => "samplesize",
            Self::Noise(_) => "noise",
            Self::Classification(_) => "classification",
            Self::Benchmark(_) => "benchmark",
            Self::Coverage(_) => "coverage",
        }
    }

    pub fn run(&self, seed: u64, workers: usize) -> Result<Vec<MetricReport>> {
        Ok(match self {
            Self::Regression(c) | Self::Samplesize(c) | Self::Noise(c) => run_regression_suite(c, seed, workers)?,
            Self::Classification(c) => run_classification_suite(c, seed, workers)?,
            Self::Benchmark(c) => run_benchmark_suite(c, seed, workers)?,
            Self::Coverage(c) => run_coverage(c, seed, workers)?,
        })
    }
}

/// `config.json` of an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentRun {
    pub seed: u64,
    #[serde(flatten)]
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(flatten)]
    pub setting: Setting,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn experiment(run: &ExperimentRun, workers: usize, out: &Path, force: bool) -> Result<Vec<SummaryRow>> {
    prepare_out(out, force)?;
    write_json(&out.join("config.json"), run)?;
    info!("running suite {} with seed {}", run.experiment.name(), run.seed);
    let reports = run.experiment.run(run.seed, workers)?;
    write_reports_csv(&reports, create(&out.join("results.csv"))?)?;
    let summary: Vec<SummaryRow> = reports
        .into_iter()
        .map(|r| SummaryRow {
            count: r.values.len(),
            setting: r.setting,
            metric: r.metric,
            mean: r.mean,
            std: r.std,
        })
        .collect();
    write_json(&out.join("metrics.json"), &summary)?;
    info!("wrote {}", out.display());
    Ok(summary)
}

/// Default output directory for a command.
pub fn default_out(kind: &str, seed: u64) -> PathBuf {
    PathBuf::from("runs").join(format!("{kind}-{seed}"))
}
