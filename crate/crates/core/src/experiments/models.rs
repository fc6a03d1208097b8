use serde::{Deserialize, Serialize};

use super::baseline::{baseline_poly_ols, PolyOls};
use crate::data::{Dataset, TaskKind};
use crate::error::{invalid, Error, Result};
use crate::optimize::{outputs_from_values, train, ExpectationModel, LossSpec, Params, TrainConfig, TrainResult};
use crate::qcl_ref::{check_cap, CircuitSpec, EncodingSpec, Observable, QclCircuit};
use crate::qcll::{default_outputs, QcllModel, QcllSpec, Variant};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Qcl,
    Qcll,
    Baseline,
}

impl ModelKind {
    pub const ALL: [Self; 3] = [Self::Qcl, Self::Qcll, Self::Baseline];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Qcl => "qcl",
            Self::Qcll => "qcll",
            Self::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qcl" => Ok(Self::Qcl),
            "qcll" => Ok(Self::Qcll),
            "baseline" => Ok(Self::Baseline),
            other => Err(invalid(format!(
                "unknown model '{other}' (expected qcl, qcll or baseline)"
            ))),
        }
    }
}

/// Hyperparameters shared by the three model kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    /// `Q_d`, qubits per input dimension.
    pub qubits_per_dim: usize,
    /// `M`, circuit depth.
    pub depth: usize,
    /// `K′`
    pub sketch_dim: usize,
    /// `P`; defaults to `Q·M`.
    pub theta_len: Option<usize>,
    /// `I`; defaults to `max(10, 5·readouts)`.
    pub outputs: Option<usize>,
    pub variant: Variant,
    pub train: TrainConfig,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            qubits_per_dim: 6,
            depth: 6,
            sketch_dim: 100,
            theta_len: None,
            outputs: None,
            variant: Variant::Plain,
            train: TrainConfig::default(),
        }
    }
}

impl ModelSettings {
    pub fn total_qubits(&self, dims: usize) -> usize {
        self.qubits_per_dim * dims
    }

    pub fn resolved_theta_len(&self, dims: usize) -> usize {
        self.theta_len.unwrap_or(self.total_qubits(dims) * self.depth)
    }

    pub fn resolved_outputs(&self, heads: usize) -> usize {
        self.outputs.unwrap_or_else(|| default_outputs(heads))
    }

    /// Checks the settings a model of `kind` on `dims` inputs needs.
    pub fn validate(&self, kind: ModelKind, dims: usize) -> Result<()> {
        if self.qubits_per_dim == 0 {
            return Err(invalid("qubits per dimension must be positive"));
        }
        if dims == 0 {
            return Err(invalid("inputs must have at least one dimension"));
        }
        self.train.validate()?;
        match kind {
            ModelKind::Qcl => check_cap(self.total_qubits(dims)),
            ModelKind::Qcll => {
                if self.sketch_dim == 0 {
                    return Err(invalid("sketch width K' must be positive"));
                }
                if self.resolved_theta_len(dims) == 0 {
                    return Err(invalid("the model needs at least one θ (depth or theta_len is zero)"));
                }
                Ok(())
            }
            ModelKind::Baseline => Ok(()),
        }
    }
}

/// Loss and readout count implied by a dataset.
pub fn loss_for(ds: &Dataset) -> Result<LossSpec> {
    match ds.kind {
        TaskKind::Regression => Ok(LossSpec::SquaredError),
        TaskKind::Classification => {
            let classes = ds.class_count();
            if classes < 2 {
                return Err(invalid("classification data must contain at least two classes"));
            }
            Ok(LossSpec::SoftmaxCrossEntropy { classes })
        }
    }
}

/// A trained model with everything needed to predict.
#[derive(Debug, Clone)]
pub enum Predictor {
    Qcl {
        model: QclCircuit,
        depth: usize,
        circuit_seed: u64,
        params: Params,
        loss: LossSpec,
    },
    Qcll {
        model: QcllModel,
        params: Params,
        loss: LossSpec,
    },
    Baseline(PolyOls),
}

/// Serialized form of a [`Predictor`]. Random structure is stored as seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum SavedModel {
    Qcl {
        qubits_per_dim: Vec<usize>,
        depth: usize,
        circuit_seed: u64,
        loss: LossSpec,
        params: Params,
    },
    Qcll {
        spec: QcllSpec,
        loss: LossSpec,
        params: Params,
    },
    Baseline(PolyOls),
}

pub fn qcl_model(qubits_per_dim: Vec<usize>, depth: usize, heads: usize, seed: u64) -> Result<QclCircuit> {
    let encoding = EncodingSpec::new(qubits_per_dim)?;
    let q = encoding.total_qubits();
    check_cap(q)?;
    let circuit = CircuitSpec::sample(q, depth, seed)?;
    let dim = 1usize << q;
    let observables = (0..heads)
        .map(|c| Observable::default_for_class(dim, c))
        .collect::<Result<Vec<_>>>()
        .map_err(|_| invalid(format!("{q} qubits cannot hold {heads} readouts of 5 amplitudes")))?;
    QclCircuit::new(encoding, circuit, observables)
}

impl Predictor {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Qcl { .. } => ModelKind::Qcl,
            Self::Qcll { .. } => ModelKind::Qcll,
            Self::Baseline(_) => ModelKind::Baseline,
        }
    }

    pub fn input_dims(&self) -> usize {
        match self {
            Self::Qcl { model, .. } => model.input_dims(),
            Self::Qcll { model, .. } => model.input_dims(),
            Self::Baseline(b) => b.qubits_per_dim.len(),
        }
    }

    pub fn task(&self) -> TaskKind {
        let loss = match self {
            Self::Qcl { loss, .. } | Self::Qcll { loss, .. } => loss,
            Self::Baseline(b) => return b.kind,
        };
        match loss {
            LossSpec::SquaredError => TaskKind::Regression,
            LossSpec::SoftmaxCrossEntropy { .. } => TaskKind::Classification,
        }
    }

    /// Per-sample outputs: `[ŷ]` for regression; class probabilities (or
    /// baseline scores) for classification.
    pub fn predict_outputs(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        for x in xs {
            if x.len() != self.input_dims() {
                return Err(invalid(format!(
                    "input has {} dimensions, model expects {}",
                    x.len(),
                    self.input_dims()
                )));
            }
        }
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        match self {
            Self::Qcl {
                model, params, loss, ..
            } => batch_outputs(model, params, loss, xs),
            Self::Qcll { model, params, loss } => batch_outputs(model, params, loss, xs),
            Self::Baseline(b) => xs.iter().map(|x| b.scores(x)).collect(),
        }
    }

    /// Regression predictions.
    pub fn predict_values(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.predict_outputs(xs)?.into_iter().map(|o| o[0]).collect())
    }

    /// Arg-max class for each input.
    pub fn predict_labels(&self, xs: &[Vec<f64>]) -> Result<Vec<usize>> {
        Ok(self
            .predict_outputs(xs)?
            .iter()
            .map(|o| {
                o.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (i, &v)| if v > best.1 { (i, v) } else { best },
                    )
                    .0
            })
            .collect())
    }

    pub fn to_saved(&self) -> SavedModel {
        match self {
            Self::Qcl {
                model,
                depth,
                circuit_seed,
                params,
                loss,
            } => SavedModel::Qcl {
                qubits_per_dim: model.encoding.qubits_per_dim().to_vec(),
                depth: *depth,
                circuit_seed: *circuit_seed,
                loss: *loss,
                params: params.clone(),
            },
            Self::Qcll { model, params, loss } => SavedModel::Qcll {
                spec: model.spec().clone(),
                loss: *loss,
                params: params.clone(),
            },
            Self::Baseline(b) => SavedModel::Baseline(b.clone()),
        }
    }

    pub fn from_saved(saved: &SavedModel) -> Result<Self> {
        let check = |params: &Params, heads: usize, theta: usize| {
            if params.a.len() != heads || params.b.len() != heads || params.theta.len() != theta {
                Err(invalid("saved parameters do not match the model shape"))
            } else {
                Ok(())
            }
        };
        match saved {
            SavedModel::Qcl {
                qubits_per_dim,
                depth,
                circuit_seed,
                loss,
                params,
            } => {
                let model = qcl_model(qubits_per_dim.clone(), *depth, loss.heads(), *circuit_seed)?;
                check(params, loss.heads(), model.theta_len())?;
                Ok(Self::Qcl {
                    model,
                    depth: *depth,
                    circuit_seed: *circuit_seed,
                    params: params.clone(),
                    loss: *loss,
                })
            }
            SavedModel::Qcll { spec, loss, params } => {
                let model = QcllModel::new(spec.clone())?;
                check(params, loss.heads(), model.theta_len())?;
                Ok(Self::Qcll {
                    model,
                    params: params.clone(),
                    loss: *loss,
                })
            }
            SavedModel::Baseline(b) => Ok(Self::Baseline(b.clone())),
        }
    }
}

fn batch_outputs<M: ExpectationModel>(
    model: &M,
    params: &Params,
    loss: &LossSpec,
    xs: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let prepared = model.prepare(xs)?;
    let fwd = model.forward(&prepared, &params.theta);
    Ok(outputs_from_values(model.values(&fwd), params, loss))
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub predictor: Predictor,
    pub training: Option<TrainResult>,
}

impl Fitted {
    /// Mean over restarts of the initial per-sample cost.
    pub fn initial_mean_cost(&self, samples: usize) -> Option<f64> {
        let t = self.training.as_ref()?;
        let starts: Vec<f64> = t.restarts.iter().filter_map(|r| r.trace.first().copied()).collect();
        (!starts.is_empty()).then(|| starts.iter().sum::<f64>() / starts.len() as f64 / samples as f64)
    }
}

/// Trains a model of `kind` on `data`. Random structure (unitaries,
/// sketches) and the training restarts draw from seeds derived from `seed`.
pub fn fit_model(kind: ModelKind, settings: &ModelSettings, data: &Dataset, seed: u64) -> Result<Fitted> {
    let dims = data.dims();
    settings.validate(kind, dims)?;
    let loss = loss_for(data)?;
    let qpd = vec![settings.qubits_per_dim; dims];
    let mut train_config = settings.train.clone();
    train_config.seed = derive_seed(seed, &[12]);
    match kind {
        ModelKind::Baseline => Ok(Fitted {
            predictor: Predictor::Baseline(baseline_poly_ols(data, settings.qubits_per_dim)?),
            training: None,
        }),
        ModelKind::Qcl => {
            let circuit_seed = derive_seed(seed, &[10]);
            let model = qcl_model(qpd, settings.depth, loss.heads(), circuit_seed)?;
            let prepared = model.prepare(&data.x)?;
            let result = train(&model, &prepared, &data.y, loss, &train_config)?;
            Ok(Fitted {
                predictor: Predictor::Qcl {
                    model,
                    depth: settings.depth,
                    circuit_seed,
                    params: result.params.clone(),
                    loss,
                },
                training: Some(result),
            })
        }
        ModelKind::Qcll => {
            let spec = QcllSpec {
                qubits_per_dim: qpd,
                sketch_dim: settings.sketch_dim,
                theta_len: settings.resolved_theta_len(dims),
                outputs: settings.resolved_outputs(loss.heads()),
                heads: loss.heads(),
                variant: settings.variant,
                seed: derive_seed(seed, &[11]),
            };
            let model = QcllModel::new(spec)?;
            let prepared = model.prepare(&data.x)?;
            let result = train(&model, &prepared, &data.y, loss, &train_config)?;
            Ok(Fitted {
                predictor: Predictor::Qcll {
                    model,
                    params: result.params.clone(),
                    loss,
                },
                training: Some(result),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_classification, gen_regression, TargetFn};
    use crate::rng::rng_from_seed;

    fn quick() -> ModelSettings {
        ModelSettings {
            qubits_per_dim: 3,
            depth: 2,
            train: TrainConfig {
                max_iterations: 20,
                restarts: 2,
                ..TrainConfig::default()
            },
            ..ModelSettings::default()
        }
    }

    #[test]
    fn saved_models_reproduce_predictions() {
        let reg = gen_regression(TargetFn::Sin, 15, 0.0, &mut rng_from_seed(1)).unwrap();
        let cls = gen_classification(8, &mut rng_from_seed(2)).unwrap();
        let mut settings = quick();
        settings.variant = Variant::Rotated;
        for ds in [&reg, &cls] {
            for kind in ModelKind::ALL {
                let fitted = fit_model(kind, &settings, ds, 5).unwrap();
                let text = serde_json::to_string(&fitted.predictor.to_saved()).unwrap();
                let back = Predictor::from_saved(&serde_json::from_str(&text).unwrap()).unwrap();
                assert_eq!(
                    fitted.predictor.predict_outputs(&ds.x).unwrap(),
                    back.predict_outputs(&ds.x).unwrap(),
                    "{kind:?}"
                );
            }
        }
    }

    #[test]
    fn qubit_cap_is_enforced_for_the_reference_only() {
        let settings = ModelSettings {
            qubits_per_dim: 30,
            ..ModelSettings::default()
        };
        assert!(matches!(
            settings.validate(ModelKind::Qcl, 1),
            Err(Error::StatevectorCap { .. })
        ));
        assert!(settings.validate(ModelKind::Qcll, 1).is_ok());
    }

    #[test]
    fn labels_come_from_largest_output() {
        let cls = gen_classification(10, &mut rng_from_seed(3)).unwrap();
        let fitted = fit_model(ModelKind::Baseline, &quick(), &cls, 0).unwrap();
        let labels = fitted.predictor.predict_labels(&cls.x).unwrap();
        assert_eq!(labels.len(), 20);
        assert!(labels.iter().all(|&l| l < 2));
    }
}
