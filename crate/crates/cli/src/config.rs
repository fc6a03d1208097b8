use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use qcll_core::data::{gen_classification, gen_regression, load_delimited, ColumnRef, Dataset, TargetFn, TaskKind};
use qcll_core::experiments::{ModelKind, ModelSettings};
use qcll_core::rng::{derive_seed, rng_from_seed};

/// Where training or evaluation data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// `y = f(x) + N(0, σ²)` with `x ~ U[−1, 1]`.
    Regression { function: TargetFn, n: usize, sigma: f64 },
    /// The disk/annulus task with `per_class` samples per class.
    Classification { per_class: usize },
    /// A CSV file with a header row; features are min-max scaled on load.
    File {
        path: PathBuf,
        target: ColumnRef,
        task: TaskKind,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        Self::Regression {
            function: TargetFn::Square,
            n: 100,
            sigma: 0.0,
        }
    }
}

const DATA_TAG: u64 = 1;
const MODEL_TAG: u64 = 2;

impl DataSource {
    pub fn task(&self) -> TaskKind {
        match self {
            Self::Regression { .. } => TaskKind::Regression,
            Self::Classification { .. } => TaskKind::Classification,
            Self::File { task, .. } => *task,
        }
    }

    /// Number of input features, if known without reading a file.
    pub fn dims(&self) -> Option<usize> {
        match self {
            Self::Regression { .. } => Some(1),
            Self::Classification { .. } => Some(2),
            Self::File { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Regression { n, sigma, .. } => {
                if *n == 0 {
                    bail!("n must be at least 1");
                }
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    bail!("sigma must be finite and non-negative, got {sigma}");
                }
            }
            Self::Classification { per_class } => {
                if *per_class == 0 {
                    bail!("per_class must be at least 1");
                }
            }
            Self::File { path, .. } => {
                if !path.is_file() {
                    bail!("dataset file {} does not exist", path.display());
                }
            }
        }
        Ok(())
    }

    /// Generates or loads the data. Synthetic draws use a seed derived from `seed`.
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        let mut rng = rng_from_seed(derive_seed(seed, &[DATA_TAG]));
        Ok(match self {
            Self::Regression { function, n, sigma } => gen_regression(*function, *n, *sigma, &mut rng)?,
            Self::Classification { per_class } => gen_classification(*per_class, &mut rng)?,
            Self::File { path, target, task } => load_delimited(path, target, *task)?,
        })
    }
}

/// Everything `train` needs; echoed to `config.json` for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub data: DataSource,
    pub settings: ModelSettings,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Qcll,
            data: DataSource::default(),
            settings: ModelSettings::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn model_seed(&self) -> u64 {
        derive_seed(self.seed, &[MODEL_TAG])
    }

    /// Checks everything that can be checked before data is loaded.
    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        if let Some(dims) = self.data.dims() {
            self.settings.validate(self.model, dims)?;
        }
        Ok(())
    }
}

/// Reads a JSON config, rejecting unknown keys.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}
