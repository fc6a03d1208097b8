use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::models::{fit_model, qcl_model, ModelKind, ModelSettings, Predictor};
use super::{classification_error, grid, pearson, rmse, run_pool, MetricReport, Setting};
use crate::data::{
    apply_scale, feature_pairs, gen_classification, gen_regression, load_delimited, minmax_scale, split, subsample,
    ColumnRef, Dataset, TargetFn, TaskKind,
};
use crate::error::{invalid, Result};
use crate::optimize::{ExpectationModel, TrainConfig};
use crate::qcl_ref::check_cap;
use crate::qcll::Variant;
use crate::rng::{derive_seed, rng_from_seed};

/// Grid RMSE, training MSE and initial MSE of one fit.
type FitScores = (f64, f64, Option<f64>);

const REGRESSION_TAG: u64 = 100;
const CLASSIFICATION_TAG: u64 = 200;
const BENCHMARK_TAG: u64 = 300;
const COVERAGE_TAG: u64 = 400;

fn model_tag(kind: ModelKind) -> u64 {
    match kind {
        ModelKind::Qcl => 1,
        ModelKind::Qcll => 2,
        ModelKind::Baseline => 3,
    }
}

fn base_setting(
    suite: &str,
    task: &str,
    kind: ModelKind,
    settings: &ModelSettings,
    dims: usize,
    heads: usize,
) -> Setting {
    let q = settings.total_qubits(dims);
    let (variant, theta_len, outputs, sketch_dim, qubits, depth) = match kind {
        ModelKind::Qcl => (
            None,
            Some(q * settings.depth),
            None,
            None,
            Some(q),
            Some(settings.depth),
        ),
        ModelKind::Qcll => (
            Some(settings.variant),
            Some(settings.resolved_theta_len(dims)),
            Some(settings.resolved_outputs(heads)),
            Some(settings.sketch_dim),
            Some(q),
            Some(settings.depth),
        ),
        ModelKind::Baseline => (None, None, None, None, Some(q), None),
    };
    Setting {
        suite: suite.to_string(),
        task: task.to_string(),
        model: kind.tag().to_string(),
        variant,
        qubits,
        depth,
        theta_len,
        outputs,
        sketch_dim,
        ..Setting::default()
    }
}

/// Regression on the synthetic targets over a grid of sample sizes and
/// noise levels. Every combination is repeated `seeds` times; QCL, QCLL and
/// the baseline see the same data within a repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub suite: String,
    pub functions: Vec<TargetFn>,
    pub sizes: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub models: Vec<ModelKind>,
    pub seeds: usize,
    /// Points of the evaluation grid over `[−1, 1]`.
    pub grid: usize,
    pub settings: ModelSettings,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            suite: "regression".into(),
            functions: TargetFn::ALL.to_vec(),
            sizes: vec![100],
            sigmas: vec![0.0],
            models: ModelKind::ALL.to_vec(),
            seeds: 10,
            grid: 201,
            settings: ModelSettings::default(),
        }
    }
}

impl RegressionConfig {
    /// Training-set sizes 10, 20, …, 100 on `x²`.
    pub fn sample_size() -> Self {
        Self {
            suite: "samplesize".into(),
            functions: vec![TargetFn::Square],
            sizes: (1..=10).map(|k| 10 * k).collect(),
            ..Self::default()
        }
    }

    /// Noise levels 0.0, 0.05, …, 0.45 on `x²`.
    pub fn noise() -> Self {
        Self {
            suite: "noise".into(),
            functions: vec![TargetFn::Square],
            sigmas: (0..10).map(|k| f64::from(k) * 0.05).collect(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.functions.is_empty() || self.sizes.is_empty() || self.sigmas.is_empty() || self.models.is_empty() {
            return Err(invalid("functions, sizes, sigmas and models must all be nonempty"));
        }
        if self.seeds == 0 || self.grid < 2 {
            return Err(invalid("need at least one seed and a grid of two or more points"));
        }
        if self.sizes.contains(&0) {
            return Err(invalid("sample sizes must be positive"));
        }
        if self.sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(invalid("noise levels must be finite and non-negative"));
        }
        for &m in &self.models {
            self.settings.validate(m, 1)?;
        }
        Ok(())
    }
}

/// Metrics per model: grid RMSE against the noiseless target, training MSE
/// and (trained models only) mean initial training MSE over restarts.
pub fn run_regression_suite(config: &RegressionConfig, master_seed: u64, workers: usize) -> Result<Vec<MetricReport>> {
    config.validate()?;
    let xs_grid: Vec<Vec<f64>> = grid(config.grid).into_iter().map(|x| vec![x]).collect();
    let mut items = Vec::new();
    for (fi, &f) in config.functions.iter().enumerate() {
        for &n in &config.sizes {
            for (si, &sigma) in config.sigmas.iter().enumerate() {
                for s in 0..config.seeds {
                    items.push((fi, f, n, si, sigma, s));
                }
            }
        }
    }
    let results = run_pool(workers, &items, |&(fi, f, n, si, sigma, s)| {
        let seed = derive_seed(master_seed, &[REGRESSION_TAG, fi as u64, n as u64, si as u64, s as u64]);
        let data = gen_regression(f, n, sigma, &mut rng_from_seed(seed))?;
        let truth: Vec<f64> = xs_grid.iter().map(|x| f.eval(x[0])).collect();
        config
            .models
            .iter()
            .map(|&kind| {
                let fitted = fit_model(kind, &config.settings, &data, derive_seed(seed, &[model_tag(kind)]))?;
                let on_grid = fitted.predictor.predict_values(&xs_grid)?;
                let on_train = fitted.predictor.predict_values(&data.x)?;
                let train_mse = rmse(&on_train, &data.y)?.powi(2);
                Ok((rmse(&on_grid, &truth)?, train_mse, fitted.initial_mean_cost(n)))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut reports = Vec::new();
    let per_point = config.seeds;
    for (fi, &f) in config.functions.iter().enumerate() {
        for (ni, &n) in config.sizes.iter().enumerate() {
            for (si, &sigma) in config.sigmas.iter().enumerate() {
                let start = ((fi * config.sizes.len() + ni) * config.sigmas.len() + si) * per_point;
                let chunk = &results[start..start + per_point];
                for (mi, &kind) in config.models.iter().enumerate() {
                    let mut setting = base_setting(&config.suite, "regression", kind, &config.settings, 1, 1);
                    setting.target = Some(f.tag().to_string());
                    setting.n = Some(n);
                    setting.sigma = Some(sigma);
                    let pick = |g: &dyn Fn(&FitScores) -> f64| chunk.iter().map(|r| g(&r[mi])).collect();
                    reports.push(MetricReport::new(setting.clone(), "grid_rmse", pick(&|r| r.0)));
                    reports.push(MetricReport::new(setting.clone(), "train_mse", pick(&|r| r.1)));
                    if kind != ModelKind::Baseline {
                        reports.push(MetricReport::new(
                            setting,
                            "initial_mse",
                            pick(&|r| r.2.unwrap_or(f64::NAN)),
                        ));
                    }
                }
            }
        }
    }
    Ok(reports)
}

/// The two-class disk/annulus task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationConfig {
    pub per_class: usize,
    pub models: Vec<ModelKind>,
    pub seeds: usize,
    pub settings: ModelSettings,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        Self {
            per_class: 100,
            models: ModelKind::ALL.to_vec(),
            seeds: 10,
            settings: ModelSettings {
                qubits_per_dim: 3,
                depth: 3,
                ..ModelSettings::default()
            },
        }
    }
}

impl ClassificationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_class == 0 || self.seeds == 0 || self.models.is_empty() {
            return Err(invalid("per_class, seeds and models must be positive / nonempty"));
        }
        for &m in &self.models {
            self.settings.validate(m, 2)?;
        }
        Ok(())
    }
}

/// Training accuracy per model and seed.
pub fn run_classification_suite(
    config: &ClassificationConfig,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<MetricReport>> {
    config.validate()?;
    let items: Vec<usize> = (0..config.seeds).collect();
    let results = run_pool(workers, &items, |&s| {
        let seed = derive_seed(master_seed, &[CLASSIFICATION_TAG, s as u64]);
        let data = gen_classification(config.per_class, &mut rng_from_seed(seed))?;
        let truth: Vec<usize> = data.y.iter().map(|&y| y as usize).collect();
        config
            .models
            .iter()
            .map(|&kind| {
                let fitted = fit_model(kind, &config.settings, &data, derive_seed(seed, &[model_tag(kind)]))?;
                let labels = fitted.predictor.predict_labels(&data.x)?;
                Ok(1.0 - classification_error(&labels, &truth)?)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(config
        .models
        .iter()
        .enumerate()
        .map(|(mi, &kind)| {
            let mut setting = base_setting("classification", "classification", kind, &config.settings, 2, 2);
            setting.n = Some(2 * config.per_class);
            MetricReport::new(setting, "train_accuracy", results.iter().map(|r| r[mi]).collect())
        })
        .collect())
}

/// A CSV benchmark file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSource {
    pub name: String,
    pub path: PathBuf,
    pub target: ColumnRef,
    pub kind: TaskKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub datasets: Vec<BenchmarkSource>,
    /// Percentages of the training split used for fitting.
    pub percentages: Vec<u32>,
    pub test_fraction: f64,
    pub models: Vec<ModelKind>,
    /// Use only the first this-many feature pairs (all when `None`).
    pub max_pairs: Option<usize>,
    pub settings: ModelSettings,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            percentages: vec![10, 20, 30, 40, 50, 75, 100],
            test_fraction: 0.2,
            models: ModelKind::ALL.to_vec(),
            max_pairs: None,
            settings: ModelSettings {
                qubits_per_dim: 3,
                depth: 6,
                ..ModelSettings::default()
            },
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(invalid("benchmark needs at least one dataset"));
        }
        if self.percentages.is_empty() || self.percentages.iter().any(|&p| p == 0 || p > 100) {
            return Err(invalid("percentages must lie in 1..=100"));
        }
        if self.models.is_empty() {
            return Err(invalid("no models selected"));
        }
        for &m in &self.models {
            self.settings.validate(m, 2)?;
        }
        Ok(())
    }
}

/// Standardizes regression targets for fitting and maps predictions back.
fn fit_standardized(
    kind: ModelKind,
    settings: &ModelSettings,
    train: &Dataset,
    seed: u64,
) -> Result<(Predictor, f64, f64)> {
    if train.kind == TaskKind::Classification {
        return Ok((fit_model(kind, settings, train, seed)?.predictor, 0.0, 1.0));
    }
    let (mean, std) = super::mean_std(&train.y);
    let scale = if std > 0.0 && std.is_finite() { std } else { 1.0 };
    let mut scaled = train.clone();
    scaled.y.iter_mut().for_each(|y| *y = (*y - mean) / scale);
    Ok((fit_model(kind, settings, &scaled, seed)?.predictor, mean, scale))
}

/// Test error (RMSE or classification error) per feature pair, training
/// fraction and model. Features are min-max scaled on the training split;
/// regression targets are standardized for fitting and errors are reported
/// in the original units.
pub fn run_benchmark_suite(config: &BenchmarkConfig, master_seed: u64, workers: usize) -> Result<Vec<MetricReport>> {
    config.validate()?;
    let mut reports = Vec::new();
    for (di, source) in config.datasets.iter().enumerate() {
        let ds = load_delimited(&source.path, &source.target, source.kind)?;
        let ds_seed = derive_seed(master_seed, &[BENCHMARK_TAG, di as u64]);
        let (train_raw, test_raw) = split(&ds, config.test_fraction, &mut rng_from_seed(ds_seed))?;
        let (train, stats) = minmax_scale(&train_raw)?;
        let test = apply_scale(&stats, &test_raw)?;
        let mut pairs = feature_pairs(&train)?;
        let test_pairs = feature_pairs(&test)?;
        if let Some(limit) = config.max_pairs {
            pairs.truncate(limit.max(1));
        }
        let mut items = Vec::new();
        for (pi, _) in pairs.iter().enumerate() {
            for (ri, _) in config.percentages.iter().enumerate() {
                items.push((pi, ri));
            }
        }
        let heads = match source.kind {
            TaskKind::Regression => 1,
            TaskKind::Classification => ds.class_count(),
        };
        let results = run_pool(workers, &items, |&(pi, ri)| {
            let seed = derive_seed(ds_seed, &[pi as u64, ri as u64]);
            let fraction = f64::from(config.percentages[ri]) / 100.0;
            let fit_data = subsample(&pairs[pi].1, fraction, &mut rng_from_seed(seed));
            let eval = &test_pairs[pi].1;
            config
                .models
                .iter()
                .map(|&kind| {
                    let (predictor, mean, scale) =
                        fit_standardized(kind, &config.settings, &fit_data, derive_seed(seed, &[model_tag(kind)]))?;
                    match source.kind {
                        TaskKind::Regression => {
                            let pred: Vec<f64> = predictor
                                .predict_values(&eval.x)?
                                .iter()
                                .map(|p| p * scale + mean)
                                .collect();
                            rmse(&pred, &eval.y)
                        }
                        TaskKind::Classification => {
                            let truth: Vec<usize> = eval.y.iter().map(|&y| y as usize).collect();
                            classification_error(&predictor.predict_labels(&eval.x)?, &truth)
                        }
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })?;
        let metric = match source.kind {
            TaskKind::Regression => "test_rmse",
            TaskKind::Classification => "test_error",
        };
        let task = match source.kind {
            TaskKind::Regression => "regression",
            TaskKind::Classification => "classification",
        };
        for (ri, &pct) in config.percentages.iter().enumerate() {
            for (mi, &kind) in config.models.iter().enumerate() {
                let mut setting = base_setting("benchmark", task, kind, &config.settings, 2, heads);
                setting.dataset = Some(source.name.clone());
                setting.fraction = Some(f64::from(pct) / 100.0);
                let values = (0..pairs.len())
                    .map(|pi| results[pi * config.percentages.len() + ri][mi])
                    .collect();
                reports.push(MetricReport::new(setting, metric, values));
            }
        }
    }
    Ok(reports)
}

/// How well a parameter-matched sketched model reproduces random circuits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageConfig {
    /// Circuit sizes `Q` (single input dimension).
    pub qubits: Vec<usize>,
    /// Depths `M`; both models get `Q·M` angles.
    pub depths: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub repetitions: usize,
    pub grid: usize,
    pub sketch_dim: usize,
    pub variant: Variant,
    pub train: TrainConfig,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            qubits: vec![6],
            depths: vec![1, 2, 4, 6],
            thresholds: vec![0.90, 0.95, 0.99],
            repetitions: 100,
            grid: 100,
            sketch_dim: 100,
            variant: Variant::Plain,
            train: TrainConfig::default(),
        }
    }
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(invalid("repetitions must be at least 1"));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(invalid("thresholds must lie in (0, 1)"));
        }
        if self.qubits.is_empty() || self.depths.is_empty() || self.depths.contains(&0) {
            return Err(invalid("qubit counts and positive depths are required"));
        }
        if self.grid < 2 || self.sketch_dim == 0 {
            return Err(invalid("grid needs two or more points and K' must be positive"));
        }
        for &q in &self.qubits {
            if q == 0 {
                return Err(invalid("qubit counts must be positive"));
            }
            check_cap(q)?;
        }
        self.train.validate()
    }
}

/// `⟨B⟩` of a random circuit (random unitaries and θ) at each `x`.
pub fn qcl_target_values(qubits: usize, depth: usize, seed: u64, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let model = qcl_model(vec![qubits], depth, 1, derive_seed(seed, &[1]))?;
    let mut rng = rng_from_seed(derive_seed(seed, &[2]));
    let theta: Vec<f64> = (0..model.theta_len())
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    let prepared = model.prepare(xs)?;
    let fwd = model.forward(&prepared, &theta);
    Ok(model.values(&fwd).to_vec())
}

/// Per `(Q, M)`: the correlation of every repetition (`rho`, NaN when the
/// fit is constant) and, per threshold, the indicator of `ρ > ρ_thre`
/// (`coverage`, whose mean is the coverage).
pub fn run_coverage(config: &CoverageConfig, master_seed: u64, workers: usize) -> Result<Vec<MetricReport>> {
    config.validate()?;
    let xs: Vec<Vec<f64>> = grid(config.grid).into_iter().map(|x| vec![x]).collect();
    let mut items = Vec::new();
    for (qi, &q) in config.qubits.iter().enumerate() {
        for (mi, &m) in config.depths.iter().enumerate() {
            for r in 0..config.repetitions {
                items.push((qi, q, mi, m, r));
            }
        }
    }
    let rhos = run_pool(workers, &items, |&(qi, q, mi, m, r)| {
        let seed = derive_seed(master_seed, &[COVERAGE_TAG, qi as u64, mi as u64, r as u64]);
        let target = qcl_target_values(q, m, seed, &xs)?;
        let data = Dataset {
            x: xs.clone(),
            y: target.clone(),
            feature_names: vec!["x".into()],
            kind: TaskKind::Regression,
            class_labels: Vec::new(),
        };
        let settings = ModelSettings {
            qubits_per_dim: q,
            depth: m,
            sketch_dim: config.sketch_dim,
            theta_len: None,
            outputs: None,
            variant: config.variant,
            train: config.train.clone(),
        };
        let fitted = fit_model(ModelKind::Qcll, &settings, &data, derive_seed(seed, &[3]))?;
        let pred = fitted.predictor.predict_values(&xs)?;
        Ok(pearson(&target, &pred).unwrap_or(f64::NAN))
    })?;
    let mut reports = Vec::new();
    for (qi, &q) in config.qubits.iter().enumerate() {
        for (mi, &m) in config.depths.iter().enumerate() {
            let start = (qi * config.depths.len() + mi) * config.repetitions;
            let chunk = &rhos[start..start + config.repetitions];
            let settings = ModelSettings {
                qubits_per_dim: q,
                depth: m,
                sketch_dim: config.sketch_dim,
                variant: config.variant,
                ..ModelSettings::default()
            };
            let mut setting = base_setting("coverage", "coverage", ModelKind::Qcll, &settings, 1, 1);
            setting.n = Some(config.grid);
            reports.push(MetricReport::new(setting.clone(), "rho", chunk.to_vec()));
            for &t in &config.thresholds {
                let mut s = setting.clone();
                s.threshold = Some(t);
                let hits = chunk.iter().map(|&rho| f64::from(u8::from(rho > t))).collect();
                reports.push(MetricReport::new(s, "coverage", hits));
            }
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::write_reports_csv;

    fn quick_train() -> TrainConfig {
        TrainConfig {
            max_iterations: 15,
            restarts: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn regression_report_shape() {
        let config = RegressionConfig {
            functions: vec![TargetFn::Square, TargetFn::Abs],
            sizes: vec![10, 20],
            sigmas: vec![0.0],
            seeds: 2,
            grid: 21,
            settings: ModelSettings {
                qubits_per_dim: 3,
                depth: 2,
                train: quick_train(),
                ..ModelSettings::default()
            },
            ..RegressionConfig::default()
        };
        let reports = run_regression_suite(&config, 1, 1).unwrap();
        let points = 2 * 2;
        for metric in ["grid_rmse", "train_mse"] {
            assert_eq!(reports.iter().filter(|r| r.metric == metric).count(), points * 3);
        }
        assert_eq!(reports.iter().filter(|r| r.metric == "initial_mse").count(), points * 2);
        assert!(reports.iter().all(|r| r.values.len() == 2));
    }

    #[test]
    fn sweep_presets_cover_the_ranges() {
        let n = RegressionConfig::sample_size();
        assert_eq!((n.sizes[0], *n.sizes.last().unwrap()), (10, 100));
        let s = RegressionConfig::noise();
        assert_eq!(s.sigmas[0], 0.0);
        assert!((s.sigmas.last().unwrap() - 0.45).abs() < 1e-12);
        assert_eq!(
            BenchmarkConfig::default().percentages,
            vec![10, 20, 30, 40, 50, 75, 100]
        );
        let b = BenchmarkConfig::default().settings;
        assert_eq!((b.qubits_per_dim, b.depth), (3, 6));
    }

    #[test]
    fn coverage_is_nested_in_threshold_and_deterministic() {
        let config = CoverageConfig {
            qubits: vec![3],
            depths: vec![1, 2],
            repetitions: 4,
            grid: 30,
            sketch_dim: 32,
            train: quick_train(),
            ..CoverageConfig::default()
        };
        let reports = run_coverage(&config, 9, 2).unwrap();
        let again = run_coverage(&config, 9, 1).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_reports_csv(&reports, &mut a).unwrap();
        write_reports_csv(&again, &mut b).unwrap();
        assert_eq!(a, b);
        for depth in [1, 2] {
            let cov: Vec<&MetricReport> = reports
                .iter()
                .filter(|r| r.metric == "coverage" && r.setting.depth == Some(depth))
                .collect();
            for pair in cov.windows(2) {
                for (lo, hi) in pair[0].values.iter().zip(&pair[1].values) {
                    assert!(hi <= lo);
                }
            }
        }
    }

    #[test]
    fn coverage_rejects_oversized_circuits() {
        let config = CoverageConfig {
            qubits: vec![30],
            ..CoverageConfig::default()
        };
        assert!(run_coverage(&config, 0, 1).is_err());
    }

    #[test]
    fn benchmark_runs_on_a_small_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let mut text = String::from("a,b,c,label\n");
        let mut rng = rng_from_seed(4);
        for i in 0..30 {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..10.0)).collect();
            text.push_str(&format!(
                "{},{},{},{}\n",
                v[0],
                v[1],
                v[2],
                if i % 2 == 0 { "p" } else { "q" }
            ));
        }
        std::fs::write(&path, text).unwrap();
        let config = BenchmarkConfig {
            datasets: vec![BenchmarkSource {
                name: "toy".into(),
                path,
                target: ColumnRef::Name("label".into()),
                kind: TaskKind::Classification,
            }],
            percentages: vec![50, 100],
            models: vec![ModelKind::Qcll, ModelKind::Baseline],
            settings: ModelSettings {
                qubits_per_dim: 2,
                depth: 2,
                train: quick_train(),
                ..ModelSettings::default()
            },
            ..BenchmarkConfig::default()
        };
        let reports = run_benchmark_suite(&config, 3, 1).unwrap();
        assert_eq!(reports.len(), 2 * 2);
        assert!(reports.iter().all(|r| r.values.len() == 3 && r.metric == "test_error"));
        assert!(reports.iter().all(|r| r.values.iter().all(|v| (0.0..=1.0).contains(v))));
    }
}
