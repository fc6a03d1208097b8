//! Metrics, the least-squares baseline, model fitting and the experiment
//! suites (regression, sample size, noise, classification, benchmark and
//! coverage).

mod baseline;
mod models;
mod suites;

pub use baseline::{baseline_poly_ols, poly_features, PolyOls};
pub use models::{fit_model, loss_for, qcl_model, Fitted, ModelKind, ModelSettings, Predictor, SavedModel};
pub use suites::{
    qcl_target_values, run_benchmark_suite, run_classification_suite, run_coverage, run_regression_suite,
    BenchmarkConfig, BenchmarkSource, ClassificationConfig, CoverageConfig, RegressionConfig,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qcll::Variant;

/// `√(mean((pred − target)²))`.
pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(invalid(format!(
            "RMSE needs equal nonempty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// Fraction of mismatched labels.
pub fn classification_error(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(invalid(format!(
            "label vectors need equal nonempty lengths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let wrong = pred.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / pred.len() as f64)
}

/// Pearson product-moment correlation. Zero variance in either input is an
/// error rather than a silent 0.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(invalid(
            "Pearson correlation needs two equal-length vectors of length ≥ 2",
        ));
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    // a constant input leaves rounding residue in its deviations, so compare against the mean
    let flat = |ss: f64, m: f64| ss == 0.0 || (ss / n).sqrt() <= 1e-13 * m.abs();
    if flat(saa, ma) || flat(sbb, mb) {
        return Err(Error::Degenerate("zero variance in Pearson correlation input".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `n` equally spaced points covering `[−1, 1]`.
pub fn grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect(),
    }
}

/// The experimental point a metric belongs to. Fields that do not apply are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub suite: String,
    pub task: String,
    pub dataset: Option<String>,
    pub target: Option<String>,
    pub model: String,
    pub variant: Option<Variant>,
    pub n: Option<usize>,
    pub sigma: Option<f64>,
    pub fraction: Option<f64>,
    pub qubits: Option<usize>,
    pub depth: Option<usize>,
    pub theta_len: Option<usize>,
    pub outputs: Option<usize>,
    pub sketch_dim: Option<usize>,
    pub threshold: Option<f64>,
}

/// One metric at one setting, with its value for every seed / repetition /
/// feature pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub setting: Setting,
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl MetricReport {
    pub fn new(setting: Setting, metric: &str, values: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&values);
        Self {
            setting,
            metric: metric.to_string(),
            values,
            mean,
            std,
        }
    }
}

/// Column order of the results CSV.
pub const CSV_HEADER: [&str; 20] = [
    "suite",
    "task",
    "dataset",
    "target",
    "model",
    "variant",
    "n",
    "sigma",
    "fraction",
    "qubits",
    "depth",
    "theta_len",
    "outputs",
    "sketch_dim",
    "threshold",
    "metric",
    "mean",
    "std",
    "count",
    "values",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

/// Writes one row per report; `values` is `;`-separated.
pub fn write_reports_csv<W: Write>(reports: &[MetricReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        let s = &r.setting;
        let variant = s.variant.map(|v| match v {
            Variant::Plain => "plain",
            Variant::Rotated => "rotated",
        });
        let values: Vec<String> = r.values.iter().map(|v| format!("{v:?}")).collect();
        w.write_record([
            s.suite.clone(),
            s.task.clone(),
            opt(&s.dataset),
            opt(&s.target),
            s.model.clone(),
            opt(&variant),
            opt(&s.n),
            opt(&s.sigma),
            opt(&s.fraction),
            opt(&s.qubits),
            opt(&s.depth),
            opt(&s.theta_len),
            opt(&s.outputs),
            opt(&s.sketch_dim),
            opt(&s.threshold),
            r.metric.clone(),
            format!("{:?}", r.mean),
            format!("{:?}", r.std),
            r.values.len().to_string(),
            values.join(";"),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::Training(format!("writing results: {e}")))?;
    Ok(())
}

/// Runs `f` over `items` on a pool of `workers` threads (0 = one per core),
/// returning results in item order.
pub fn run_pool<T: Sync, R: Send>(workers: usize, items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.5, 2.5, 3.5], &[1.0, 2.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        let mut rng = rng_from_seed(1);
        let a: Vec<f64> = (0..30).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..30).map(|_| rng.random()).collect();
        let direct = (a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / 30.0).sqrt();
        assert!((rmse(&a, &b).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn classification_error_cases() {
        assert_eq!(classification_error(&[0, 1], &[0, 1]).unwrap(), 0.0);
        assert_eq!(classification_error(&[1, 0], &[0, 1]).unwrap(), 1.0);
        assert_eq!(classification_error(&[0, 1, 1, 0], &[0, 1, 1, 1]).unwrap(), 0.25);
        assert!(classification_error(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn pearson_cases() {
        let a = [0.1, -0.4, 2.0, 0.7];
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let affine: Vec<f64> = a.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&a, &affine).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&a, &[1.0; 4]), Err(Error::Degenerate(_))));
        assert!(matches!(pearson(&[0.3; 4], &a), Err(Error::Degenerate(_))));
        assert!(pearson(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn report_statistics_recompute() {
        let r = MetricReport::new(Setting::default(), "m", vec![1.0, 2.0, 4.0]);
        assert!((r.mean - 7.0 / 3.0).abs() < 1e-15);
        let var = ((1.0 - r.mean).powi(2) + (2.0 - r.mean).powi(2) + (4.0 - r.mean).powi(2)) / 2.0;
        assert!((r.std - var.sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn grid_endpoints() {
        let g = grid(201);
        assert_eq!((g[0], g[100], g[200]), (-1.0, 0.0, 1.0));
        assert_eq!(grid(100).len(), 100);
    }

    #[test]
    fn csv_rows_follow_header() {
        let setting = Setting {
            suite: "noise".into(),
            model: "qcl".into(),
            sigma: Some(0.2),
            variant: Some(Variant::Rotated),
            ..Setting::default()
        };
        let mut buf = Vec::new();
        write_reports_csv(&[MetricReport::new(setting, "grid_rmse", vec![0.5, 0.25])], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(
            lines[1],
            "noise,,,,qcl,rotated,,0.2,,,,,,,,grid_rmse,0.375,0.1767766952966369,2,0.5;0.25"
        );
    }

    #[test]
    fn pool_preserves_order() {
        let items: Vec<u64> = (0..50).collect();
        let out = run_pool(3, &items, |&i| Ok(i * i)).unwrap();
        assert_eq!(out, items.iter().map(|i| i * i).collect::<Vec<_>>());
        assert!(run_pool(2, &items, |&i| if i == 7 { Err(invalid("x")) } else { Ok(i) }).is_err());
    }
}
