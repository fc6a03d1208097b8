//! Losses, the summed training cost and its chain-rule gradient, and a
//! multi-restart trainer shared by the QCL and QCLL predictors.
//!
//! A predictor is split into an [`ExpectationModel`], which maps inputs and
//! θ to one real readout per observable, and a linear head: observable `c`
//! produces `a_c·⟨B_c⟩ + b_c`. Regression uses a single observable with the
//! identity link; classification feeds one logit per class into a softmax.

mod trainer;

pub use trainer::{train, write_trace_csv, OptimizerKind, RestartOutcome, TrainConfig, TrainResult};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Cross-entropy clamps probabilities from below at this value.
pub const PROB_FLOOR: f64 = 1e-12;

/// A parameterized readout: inputs → `⟨B_c⟩` for each observable `c`.
pub trait ExpectationModel: Sync {
    /// Per-dataset precomputation that does not depend on θ.
    type Prepared: Send + Sync;
    /// Whatever the forward pass must keep for the backward pass.
    type Forward;

    fn theta_len(&self) -> usize;
    fn observable_count(&self) -> usize;
    fn input_dims(&self) -> usize;
    fn prepare(&self, inputs: &[Vec<f64>]) -> Result<Self::Prepared>;
    fn sample_count(prepared: &Self::Prepared) -> usize;
    /// Panics if `theta.len() != self.theta_len()`.
    fn forward(&self, prepared: &Self::Prepared, theta: &[f64]) -> Self::Forward;
    /// Readouts, row-major `N × C`.
    fn values<'a>(&self, forward: &'a Self::Forward) -> &'a [f64];
    /// Gradient of `Σ_{n,c} weights[n·C + c]·⟨B_c⟩_n` with respect to θ.
    fn backward(&self, prepared: &Self::Prepared, theta: &[f64], forward: &Self::Forward, weights: &[f64]) -> Vec<f64>;
}

/// Learned parameters: one `(a, b)` pair per observable plus the shared θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Params {
    pub fn heads(&self) -> usize {
        self.a.len()
    }

    /// Flat layout `[a…, b…, θ…]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.a.len() + self.theta.len());
        v.extend_from_slice(&self.a);
        v.extend_from_slice(&self.b);
        v.extend_from_slice(&self.theta);
        v
    }

    pub fn from_flat(heads: usize, flat: &[f64]) -> Self {
        Self {
            a: flat[..heads].to_vec(),
            b: flat[heads..2 * heads].to_vec(),
            theta: flat[2 * heads..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    SquaredError,
    SoftmaxCrossEntropy { classes: usize },
}

impl LossSpec {
    /// Number of observables / heads the loss consumes.
    pub fn heads(&self) -> usize {
        match self {
            Self::SquaredError => 1,
            Self::SoftmaxCrossEntropy { classes } => *classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::SoftmaxCrossEntropy { classes } if *classes < 2 => {
                Err(invalid("classification needs at least two classes"))
            }
            _ => Ok(()),
        }
    }
}

pub fn squared_error(y: f64, y_hat: f64) -> f64 {
    (y - y_hat).powi(2)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `−ln p[label]` with `p` floored at [`PROB_FLOOR`].
pub fn cross_entropy(label: usize, p: &[f64]) -> Result<f64> {
    let prob = p
        .get(label)
        .ok_or_else(|| invalid(format!("class index {label} out of range for {} classes", p.len())))?;
    Ok(-prob.max(PROB_FLOOR).ln())
}

fn class_index(y: f64, classes: usize) -> Result<usize> {
    if y >= 0.0 && y.fract() == 0.0 && (y as usize) < classes {
        Ok(y as usize)
    } else {
        Err(invalid(format!("target {y} is not a class index below {classes}")))
    }
}

/// Per-sample outputs from readouts: `[ŷ]` for regression, class
/// probabilities for classification.
pub fn outputs_from_values(values: &[f64], params: &Params, loss: &LossSpec) -> Vec<Vec<f64>> {
    let c = params.heads();
    values
        .chunks(c)
        .map(|q| {
            let z: Vec<f64> = (0..c).map(|k| params.a[k] * q[k] + params.b[k]).collect();
            match loss {
                LossSpec::SquaredError => z,
                LossSpec::SoftmaxCrossEntropy { .. } => softmax(&z),
            }
        })
        .collect()
}

/// `Σ_n E(y_n, ŷ_n)` from already computed per-sample outputs.
pub fn cost_of_outputs(outputs: &[Vec<f64>], targets: &[f64], loss: &LossSpec) -> Result<f64> {
    if outputs.is_empty() {
        return Err(invalid("cost over an empty dataset"));
    }
    if outputs.len() != targets.len() {
        return Err(invalid("prediction and target counts differ"));
    }
    let mut total = 0.0;
    for (out, &y) in outputs.iter().zip(targets) {
        total += match loss {
            LossSpec::SquaredError => squared_error(y, out[0]),
            LossSpec::SoftmaxCrossEntropy { classes } => cross_entropy(class_index(y, *classes)?, out)?,
        };
    }
    Ok(total)
}

/// Training data bound to a model: the cost and its gradient over `(a, b, θ)`.
pub struct Objective<'a, M: ExpectationModel> {
    pub model: &'a M,
    pub prepared: &'a M::Prepared,
    pub targets: &'a [f64],
    pub loss: LossSpec,
}

impl<'a, M: ExpectationModel> Objective<'a, M> {
    pub fn new(model: &'a M, prepared: &'a M::Prepared, targets: &'a [f64], loss: LossSpec) -> Result<Self> {
        loss.validate()?;
        let n = M::sample_count(prepared);
        if n == 0 {
            return Err(invalid("cost over an empty dataset"));
        }
        if targets.len() != n {
            return Err(invalid(format!("{} targets for {n} samples", targets.len())));
        }
        if model.observable_count() != loss.heads() {
            return Err(invalid(format!(
                "model has {} observables but the loss needs {}",
                model.observable_count(),
                loss.heads()
            )));
        }
        if let LossSpec::SoftmaxCrossEntropy { classes } = loss {
            for &y in targets {
                class_index(y, classes)?;
            }
        }
        Ok(Self {
            model,
            prepared,
            targets,
            loss,
        })
    }

    pub fn heads(&self) -> usize {
        self.loss.heads()
    }

    /// Length of the flat parameter vector.
    pub fn dim(&self) -> usize {
        2 * self.heads() + self.model.theta_len()
    }

    fn check(&self, params: &Params) -> Result<()> {
        if params.a.len() != self.heads() || params.b.len() != self.heads() {
            return Err(invalid("head parameter count does not match the loss"));
        }
        if params.theta.len() != self.model.theta_len() {
            return Err(invalid(format!(
                "θ has {} entries, model needs {}",
                params.theta.len(),
                self.model.theta_len()
            )));
        }
        Ok(())
    }

    pub fn outputs(&self, params: &Params) -> Result<Vec<Vec<f64>>> {
        self.check(params)?;
        let fwd = self.model.forward(self.prepared, &params.theta);
        Ok(outputs_from_values(self.model.values(&fwd), params, &self.loss))
    }

    pub fn cost(&self, params: &Params) -> Result<f64> {
        cost_of_outputs(&self.outputs(params)?, self.targets, &self.loss)
    }

    /// Cost and flat gradient `[∂a…, ∂b…, ∂θ…]`.
    pub fn cost_gradient(&self, params: &Params) -> Result<(f64, Vec<f64>)> {
        self.check(params)?;
        let c = self.heads();
        let fwd = self.model.forward(self.prepared, &params.theta);
        let values = self.model.values(&fwd);
        let n = self.targets.len();
        // dcost/dz for each sample and head, z = a·q + b
        let mut dz = vec![0.0; n * c];
        let mut total = 0.0;
        for (s, (&y, q)) in self.targets.iter().zip(values.chunks(c)).enumerate() {
            let z: Vec<f64> = (0..c).map(|k| params.a[k] * q[k] + params.b[k]).collect();
            match self.loss {
                LossSpec::SquaredError => {
                    total += squared_error(y, z[0]);
                    dz[s] = 2.0 * (z[0] - y);
                }
                LossSpec::SoftmaxCrossEntropy { classes } => {
                    let label = class_index(y, classes)?;
                    let p = softmax(&z);
                    let raw = log_sum_exp(&z) - z[label];
                    let ceiling = -PROB_FLOOR.ln();
                    if raw < ceiling {
                        total += raw;
                        for k in 0..c {
                            dz[s * c + k] = p[k] - f64::from(u8::from(k == label));
                        }
                    } else {
                        total += ceiling;
                    }
                }
            }
        }
        if !total.is_finite() {
            return Err(Error::Training("non-finite cost".into()));
        }
        let mut grad = vec![0.0; self.dim()];
        let mut weights = vec![0.0; n * c];
        for s in 0..n {
            for k in 0..c {
                let d = dz[s * c + k];
                grad[k] += d * values[s * c + k];
                grad[c + k] += d;
                weights[s * c + k] = d * params.a[k];
            }
        }
        let theta_grad = self.model.backward(self.prepared, &params.theta, &fwd, &weights);
        grad[2 * c..].copy_from_slice(&theta_grad);
        Ok((total, grad))
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
