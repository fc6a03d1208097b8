//! Synthetic tasks, CSV loading, min-max scaling and train/test splitting.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification,
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Self::Regression),
            "classification" => Ok(Self::Classification),
            other => Err(invalid(format!(
                "unknown task '{other}' (expected regression or classification)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// One row per sample.
    pub x: Vec<Vec<f64>>,
    /// Real targets, or class indices stored as whole numbers.
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub kind: TaskKind,
    /// Original label of each class index (classification only).
    pub class_labels: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_count(&self) -> usize {
        match self.kind {
            TaskKind::Regression => 0,
            TaskKind::Classification => self
                .class_labels
                .len()
                .max(self.y.iter().fold(0.0f64, |m, &v| m.max(v + 1.0)) as usize),
        }
    }

    fn subset(&self, rows: &[usize]) -> Self {
        Self {
            x: rows.iter().map(|&r| self.x[r].clone()).collect(),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            feature_names: self.feature_names.clone(),
            kind: self.kind,
            class_labels: self.class_labels.clone(),
        }
    }

    /// The first `count` rows.
    pub fn head(&self, count: usize) -> Self {
        let rows: Vec<usize> = (0..count.min(self.len())).collect();
        self.subset(&rows)
    }

    /// Writes the dataset as CSV with the target in the last column named `target`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(e) => io(e),
            other => Error::Format {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
        let mut header = self.feature_names.clone();
        header.push("target".into());
        w.write_record(&header)?;
        for (row, y) in self.x.iter().zip(&self.y) {
            let mut rec: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            rec.push(match self.kind {
                TaskKind::Classification if !self.class_labels.is_empty() => self.class_labels[*y as usize].clone(),
                _ => format_float(*y),
            });
            w.write_record(&rec)?;
        }
        w.flush().map_err(io)
    }
}

/// Shortest representation that parses back to the same `f64`.
fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Target functions of the one-dimensional regression task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetFn {
    #[serde(rename = "x2", alias = "square")]
    Square,
    Exp,
    Sin,
    Abs,
}

impl TargetFn {
    pub const ALL: [Self; 4] = [Self::Square, Self::Exp, Self::Sin, Self::Abs];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Square => x * x,
            Self::Exp => x.exp(),
            Self::Sin => x.sin(),
            Self::Abs => x.abs(),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Square => "x2",
            Self::Exp => "exp",
            Self::Sin => "sin",
            Self::Abs => "abs",
        }
    }
}

impl fmt::Display for TargetFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for TargetFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x2" | "square" => Ok(Self::Square),
            "exp" => Ok(Self::Exp),
            "sin" => Ok(Self::Sin),
            "abs" => Ok(Self::Abs),
            other => Err(invalid(format!(
                "unknown target function '{other}' (expected x2, exp, sin or abs)"
            ))),
        }
    }
}

/// `x ~ U[−1, 1]`, `y = f(x) + N(0, σ²)`.
pub fn gen_regression<R: Rng + ?Sized>(f: TargetFn, n: usize, sigma: f64, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("sample count must be positive"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise level {sigma} must be finite and non-negative")));
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let v = rng.random_range(-1.0..=1.0);
        x.push(vec![v]);
        y.push(if sigma == 0.0 {
            f.eval(v)
        } else {
            f.eval(v) + noise.sample(rng)
        });
    }
    Ok(Dataset {
        x,
        y,
        feature_names: vec!["x".into()],
        kind: TaskKind::Regression,
        class_labels: Vec::new(),
    })
}

/// Radius of the inner (class index 1) disk.
pub const INNER_RADIUS: f64 = 0.55;
/// Points of class index 0 lie at least this far from the origin.
pub const OUTER_RADIUS: f64 = 0.65;

/// Two-class task in `[−1, 1]²`: class 0 outside radius 0.65, class 1 inside
/// radius 0.55, by rejection sampling. Rows are interleaved 0, 1, 0, 1, ….
pub fn gen_classification<R: Rng + ?Sized>(per_class: usize, rng: &mut R) -> Result<Dataset> {
    if per_class == 0 {
        return Err(invalid("per-class sample count must be positive"));
    }
    let mut draw = |accept: &dyn Fn(f64) -> bool| loop {
        let p = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
        if accept(p[0] * p[0] + p[1] * p[1]) {
            return p.to_vec();
        }
    };
    let mut x = Vec::with_capacity(2 * per_class);
    let mut y = Vec::with_capacity(2 * per_class);
    for _ in 0..per_class {
        x.push(draw(&|r2| r2 >= OUTER_RADIUS * OUTER_RADIUS));
        y.push(0.0);
        x.push(draw(&|r2| r2 <= INNER_RADIUS * INNER_RADIUS));
        y.push(1.0);
    }
    Ok(Dataset {
        x,
        y,
        feature_names: vec!["x1".into(), "x2".into()],
        kind: TaskKind::Classification,
        class_labels: vec!["outer".into(), "inner".into()],
    })
}

/// Target column by header name or 0-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl FromStr for ColumnRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(s.parse::<usize>()
            .map_or_else(|_| Self::Name(s.to_string()), Self::Index))
    }
}

/// Loads a comma-separated file with one header row. Feature cells must be
/// numeric; classification targets may be arbitrary labels and are numbered
/// in order of first appearance. Row numbers in errors count the header as
/// row 1.
pub fn load_delimited(path: &Path, target: &ColumnRef, kind: TaskKind) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let format = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(format("file is empty".into()));
    }
    let target_idx = match target {
        ColumnRef::Index(i) if *i < headers.len() => *i,
        ColumnRef::Index(i) => {
            return Err(format(format!(
                "target column {i} out of range ({} columns)",
                headers.len()
            )))
        }
        ColumnRef::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format(format!("no column named '{name}'")))?,
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut label_index: HashMap<String, usize> = HashMap::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 2;
        let mut features = Vec::with_capacity(feature_names.len());
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if c == target_idx && kind == TaskKind::Classification {
                let next = labels.len();
                let idx = *label_index.entry(cell.to_string()).or_insert_with(|| {
                    labels.push(cell.to_string());
                    next
                });
                y.push(idx as f64);
                continue;
            }
            let value: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: headers[c].clone(),
                    message: format!("'{cell}' is not a finite number"),
                })?;
            if c == target_idx {
                y.push(value);
            } else {
                features.push(value);
            }
        }
        x.push(features);
    }
    if y.is_empty() {
        return Err(format("file has a header but no data rows".into()));
    }
    Ok(Dataset {
        x,
        y,
        feature_names,
        kind,
        class_labels: labels,
    })
}

/// Per-feature range of the fitting split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingStats {
    fn map(&self, d: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[d], self.max[d]);
        if hi == lo {
            0.0
        } else {
            (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
        }
    }
}

/// Maps each feature affinely so the training minimum goes to −1 and the
/// maximum to +1. Constant features map to 0.
pub fn minmax_scale(train: &Dataset) -> Result<(Dataset, ScalingStats)> {
    if train.is_empty() {
        return Err(invalid("cannot scale an empty dataset"));
    }
    let d = train.dims();
    let mut stats = ScalingStats {
        min: vec![f64::INFINITY; d],
        max: vec![f64::NEG_INFINITY; d],
    };
    for row in &train.x {
        for (k, &v) in row.iter().enumerate() {
            stats.min[k] = stats.min[k].min(v);
            stats.max[k] = stats.max[k].max(v);
        }
    }
    let scaled = apply_scale(&stats, train)?;
    Ok((scaled, stats))
}

/// Applies training-split statistics, clamping out-of-range values to `[−1, 1]`.
pub fn apply_scale(stats: &ScalingStats, other: &Dataset) -> Result<Dataset> {
    if other.dims() != stats.min.len() {
        return Err(invalid(format!(
            "scaling fitted on {} features applied to {}",
            stats.min.len(),
            other.dims()
        )));
    }
    let mut out = other.clone();
    for row in &mut out.x {
        for (k, v) in row.iter_mut().enumerate() {
            *v = stats.map(k, *v);
        }
    }
    Ok(out)
}

/// Random disjoint split with `round(test_fraction·N)` test rows.
pub fn split<R: Rng + ?Sized>(ds: &Dataset, test_fraction: f64, rng: &mut R) -> Result<(Dataset, Dataset)> {
    if ds.len() < 5 {
        return Err(invalid(format!("need at least 5 samples to split, have {}", ds.len())));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(invalid("test fraction must lie in (0, 1)"));
    }
    let mut rows: Vec<usize> = (0..ds.len()).collect();
    rows.shuffle(rng);
    let n_test = ((ds.len() as f64 * test_fraction).round() as usize).clamp(1, ds.len() - 1);
    let (test, train) = rows.split_at(n_test);
    let (mut train, mut test) = (train.to_vec(), test.to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// A random `fraction` of the rows (at least one), original order kept.
pub fn subsample<R: Rng + ?Sized>(ds: &Dataset, fraction: f64, rng: &mut R) -> Dataset {
    let mut rows: Vec<usize> = (0..ds.len()).collect();
    rows.shuffle(rng);
    let keep = ((ds.len() as f64 * fraction).round() as usize).clamp(1, ds.len());
    let mut rows = rows[..keep].to_vec();
    rows.sort_unstable();
    ds.subset(&rows)
}

/// Every unordered pair of features, lexicographic, as `((i, j), sub-dataset)`.
pub fn feature_pairs(ds: &Dataset) -> Result<Vec<((usize, usize), Dataset)>> {
    let d = ds.dims();
    if d < 2 {
        return Err(invalid(format!("need at least two features, have {d}")));
    }
    let mut out = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            out.push((
                (i, j),
                Dataset {
                    x: ds.x.iter().map(|r| vec![r[i], r[j]]).collect(),
                    y: ds.y.clone(),
                    feature_names: vec![ds.feature_names[i].clone(), ds.feature_names[j].clone()],
                    kind: ds.kind,
                    class_labels: ds.class_labels.clone(),
                },
            ));
        }
    }
    Ok(out)
}
