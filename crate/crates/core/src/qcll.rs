//! The sketched circuit-like model.
//!
//! Inputs are encoded as the tensor sketch `v̂_in(x)` of the `2^Q`-dimensional
//! product state. The trainable weight `u(θ) = ⊗_p (cos θ_p, sin θ_p)` is
//! tensor-sketched `I` times with independent sketch tables, and output `i`
//! is `û_i(θ)·v̂_in(x)` (or `û_i(θ)†·R·v̂_in(x)` with a frozen Haar-random
//! `R`). Readouts are `v̂_out† B_c v̂_out`.
//!
//! All sketch tables are regenerated from the model seed, so a model is fully
//! described by its [`QcllSpec`].
//!
//! Batch training works in the frequency domain. With `ω = exp(−2πi/K′)`,
//! the spectrum of `û_i(θ)` is `Û_ij = Π_p (cos θ_p·s⁰_ip·ω^{h⁰_ip·j} +
//! sin θ_p·s¹_ip·ω^{h¹_ip·j})`, and by Parseval `v̂_out,i =
//! (1/K′)·Σ_j conj(Û_ij)·W_j` with `W = fft(v̂_in)` (or `fft(R·v̂_in)`). The
//! input spectra depend only on the data, so a forward pass costs
//! `O(I·P·K′ + N·I·K′)` and the θ-gradient is accumulated with prefix and
//! suffix products over `p`.

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::optimize::{outputs_from_values, ExpectationModel, LossSpec, Params};
use crate::qcl_ref::{haar_unitary, unitarity_defect, EncodingSpec, Observable};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sketch::{estimate_inner, tensor_sketch, CountSketch, SketchVector};
use crate::spectral::with_plan;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const INPUT_TAG: u64 = 1;
const WEIGHT_TAG: u64 = 2;
const ROTATION_TAG: u64 = 3;

/// Which output formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `û_i·v̂_in`
    #[default]
    Plain,
    /// `û_i†·R·v̂_in` with a Haar-random `R`
    Rotated,
}

impl std::str::FromStr for Variant {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "rotated" => Ok(Self::Rotated),
            other => Err(invalid(format!(
                "unknown variant '{other}' (expected plain or rotated)"
            ))),
        }
    }
}

/// Everything needed to rebuild a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QcllSpec {
    pub qubits_per_dim: Vec<usize>,
    /// `K′`
    pub sketch_dim: usize,
    /// `P`
    pub theta_len: usize,
    /// `I`
    pub outputs: usize,
    /// Number of readouts; readout `c` is the projector on outputs `5c..5c+5`.
    pub heads: usize,
    pub variant: Variant,
    pub seed: u64,
}

impl QcllSpec {
    /// `K′ = 100`, `P = Q·depth`, `I = max(10, 5·heads)`.
    pub fn with_defaults(qubits_per_dim: Vec<usize>, depth: usize, heads: usize, variant: Variant, seed: u64) -> Self {
        let q: usize = qubits_per_dim.iter().sum();
        Self {
            qubits_per_dim,
            sketch_dim: 100,
            theta_len: q * depth,
            outputs: default_outputs(heads),
            heads,
            variant,
            seed,
        }
    }
}

pub fn default_outputs(heads: usize) -> usize {
    (5 * heads).max(10)
}

#[derive(Debug, Clone)]
pub struct QcllModel {
    spec: QcllSpec,
    encoding: EncodingSpec,
    input_sketches: Vec<CountSketch>,
    /// `I` sets of `P` sketches, `weight_sketches[i][p]`.
    weight_sketches: Vec<Vec<CountSketch>>,
    rotation: Option<Array2<Complex64>>,
    observables: Vec<Observable>,
    /// Spectra of the sketched basis vectors `e₀`, `e₁`, laid out `[(i·P + p)·K′ + j]`.
    spectra: [Vec<Complex64>; 2],
}

impl QcllModel {
    pub fn new(spec: QcllSpec) -> Result<Self> {
        if spec.heads == 0 {
            return Err(invalid("at least one readout is required"));
        }
        let observables = (0..spec.heads)
            .map(|c| Observable::default_for_class(spec.outputs, c))
            .collect::<Result<Vec<_>>>()
            .map_err(|_| {
                invalid(format!(
                    "I={} outputs cannot hold {} readouts of 5 entries",
                    spec.outputs, spec.heads
                ))
            })?;
        Self::with_observables(spec, observables)
    }

    /// Builds a model with explicit readouts; `spec.heads` is overwritten.
    pub fn with_observables(mut spec: QcllSpec, observables: Vec<Observable>) -> Result<Self> {
        let encoding = EncodingSpec::new(spec.qubits_per_dim.clone())?;
        if spec.sketch_dim == 0 || spec.theta_len == 0 || spec.outputs == 0 {
            return Err(invalid("K', P and I must be positive"));
        }
        if observables.is_empty() {
            return Err(invalid("at least one readout is required"));
        }
        if let Some(o) = observables.iter().find(|o| o.dim() != spec.outputs) {
            return Err(invalid(format!(
                "observable of dimension {} for I={}",
                o.dim(),
                spec.outputs
            )));
        }
        spec.heads = observables.len();
        let k = spec.sketch_dim;
        let input_sketches = (0..encoding.total_qubits())
            .map(|q| CountSketch::from_seed(2, k, derive_seed(spec.seed, &[INPUT_TAG, q as u64])))
            .collect::<Result<Vec<_>>>()?;
        let weight_sketches = (0..spec.outputs)
            .map(|i| {
                (0..spec.theta_len)
                    .map(|p| CountSketch::from_seed(2, k, derive_seed(spec.seed, &[WEIGHT_TAG, i as u64, p as u64])))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let rotation = match spec.variant {
            Variant::Plain => None,
            Variant::Rotated => Some(haar_unitary(
                k,
                &mut rng_from_seed(derive_seed(spec.seed, &[ROTATION_TAG])),
            )?),
        };
        let spectra = basis_spectra(&weight_sketches, k);
        Ok(Self {
            spec,
            encoding,
            input_sketches,
            weight_sketches,
            rotation,
            observables,
            spectra,
        })
    }

    /// Replaces `R` (switching to the rotated variant). `R` must be unitary.
    pub fn set_rotation(&mut self, r: Array2<Complex64>) -> Result<()> {
        let k = self.spec.sketch_dim;
        if r.dim() != (k, k) {
            return Err(invalid(format!("R must be {k}×{k}")));
        }
        if unitarity_defect(&r.view()) > 1e-10 {
            return Err(invalid("R is not unitary"));
        }
        self.rotation = Some(r);
        self.spec.variant = Variant::Rotated;
        Ok(())
    }

    pub fn spec(&self) -> &QcllSpec {
        &self.spec
    }

    pub fn encoding(&self) -> &EncodingSpec {
        &self.encoding
    }

    pub fn sketch_dim(&self) -> usize {
        self.spec.sketch_dim
    }

    pub fn outputs(&self) -> usize {
        self.spec.outputs
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn input_sketches(&self) -> &[CountSketch] {
        &self.input_sketches
    }

    pub fn weight_sketches(&self, i: usize) -> Option<&[CountSketch]> {
        self.weight_sketches.get(i).map(Vec::as_slice)
    }

    pub fn rotation(&self) -> Option<&Array2<Complex64>> {
        self.rotation.as_ref()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.spec.theta_len {
            return Err(invalid(format!(
                "θ has {} entries, model needs P={}",
                theta.len(),
                self.spec.theta_len
            )));
        }
        Ok(())
    }

    /// `v̂_in(x)`.
    pub fn sketch_input(&self, x: &[f64]) -> Result<SketchVector> {
        let factors = self.encoding.factors(x)?;
        tensor_sketch(&self.input_sketches, &factors)
    }

    /// `û_i(θ)`.
    pub fn sketch_weight(&self, theta: &[f64], i: usize) -> Result<SketchVector> {
        self.check_theta(theta)?;
        let sketches = self
            .weight_sketches
            .get(i)
            .ok_or_else(|| invalid(format!("weight index {i} out of range for I={}", self.spec.outputs)))?;
        let factors: Vec<[f64; 2]> = theta.iter().map(|t| [t.cos(), t.sin()]).collect();
        tensor_sketch(sketches, &factors)
    }

    /// `v̂_out` from an already computed input sketch.
    pub fn output_from_input_sketch(&self, v_in: &SketchVector, theta: &[f64]) -> Result<Vec<Complex64>> {
        if v_in.len() != self.spec.sketch_dim {
            return Err(invalid("input sketch width differs from K'"));
        }
        let rotated;
        let v = match &self.rotation {
            Some(r) => {
                rotated = SketchVector(r.dot(&ArrayView1::from(v_in.entries())).to_vec());
                &rotated
            }
            None => v_in,
        };
        (0..self.spec.outputs)
            .map(|i| estimate_inner(&self.sketch_weight(theta, i)?, v))
            .collect()
    }

    /// `v̂_out(x, θ)`.
    pub fn output_vector(&self, x: &[f64], theta: &[f64]) -> Result<Vec<Complex64>> {
        self.output_from_input_sketch(&self.sketch_input(x)?, theta)
    }

    /// `∂v̂_out,i/∂θ_p`, shape `I × P`: column `p` is the output at `θ + (π/2)e_p`.
    pub fn output_gradient(&self, x: &[f64], theta: &[f64]) -> Result<Array2<Complex64>> {
        self.check_theta(theta)?;
        let v_in = self.sketch_input(x)?;
        let mut out = Array2::from_elem((self.spec.outputs, theta.len()), ZERO);
        let mut shifted = theta.to_vec();
        for p in 0..theta.len() {
            shifted[p] += FRAC_PI_2;
            let col = self.output_from_input_sketch(&v_in, &shifted)?;
            out.column_mut(p).assign(&ArrayView1::from(&col));
            shifted[p] = theta[p];
        }
        Ok(out)
    }

    /// `Re(v̂_out† B_c v̂_out)` for every readout.
    pub fn readouts(&self, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        let v = self.output_vector(x, theta)?;
        self.observables
            .iter()
            .map(|o| o.quadratic_form(&v).map(|z| z.re))
            .collect()
    }

    /// `[ŷ]` for regression or class probabilities for classification.
    pub fn predict(&self, params: &Params, x: &[f64], loss: &LossSpec) -> Result<Vec<f64>> {
        if params.heads() != self.observables.len() {
            return Err(invalid("head parameters do not match the readouts"));
        }
        let q = self.readouts(x, &params.theta)?;
        Ok(outputs_from_values(&q, params, loss).remove(0))
    }
}

fn basis_spectra(weight_sketches: &[Vec<CountSketch>], k: usize) -> [Vec<Complex64>; 2] {
    let roots: Vec<Complex64> = (0..k)
        .map(|m| Complex64::from_polar(1.0, -2.0 * PI * m as f64 / k as f64))
        .collect();
    let mut out = [Vec::new(), Vec::new()];
    for set in weight_sketches {
        for c in set {
            for (e, spectrum) in out.iter_mut().enumerate() {
                let (h, s) = (c.buckets()[e], f64::from(c.signs()[e]));
                spectrum.extend((0..k).map(|j| roots[(h * j) % k] * s));
            }
        }
    }
    out
}

/// Input spectra `W_n`, row-major `N × K′`.
#[derive(Debug, Clone)]
pub struct QcllPrepared {
    samples: usize,
    spectra: Vec<Complex64>,
}

impl QcllPrepared {
    pub fn samples(&self) -> usize {
        self.samples
    }
}

#[derive(Debug, Clone)]
pub struct QcllForward {
    /// `v̂_out`, row-major `N × I`.
    outputs: Vec<Complex64>,
    values: Vec<f64>,
}

impl QcllForward {
    pub fn outputs(&self) -> &[Complex64] {
        &self.outputs
    }
}

impl QcllModel {
    /// `Û_ij` for all `i`, row-major `I × K′`.
    fn weight_spectra(&self, theta: &[f64]) -> Vec<Complex64> {
        let (k, p_len) = (self.spec.sketch_dim, self.spec.theta_len);
        let mut u = vec![Complex64::new(1.0, 0.0); self.spec.outputs * k];
        for (i, row) in u.chunks_mut(k).enumerate() {
            for (p, t) in theta.iter().enumerate() {
                let (s, c) = t.sin_cos();
                let base = (i * p_len + p) * k;
                let (e0, e1) = (&self.spectra[0][base..base + k], &self.spectra[1][base..base + k]);
                for j in 0..k {
                    row[j] *= e0[j] * c + e1[j] * s;
                }
            }
        }
        u
    }
}

impl ExpectationModel for QcllModel {
    type Prepared = QcllPrepared;
    type Forward = QcllForward;

    fn theta_len(&self) -> usize {
        self.spec.theta_len
    }

    fn observable_count(&self) -> usize {
        self.observables.len()
    }

    fn input_dims(&self) -> usize {
        self.encoding.dims()
    }

    fn prepare(&self, inputs: &[Vec<f64>]) -> Result<QcllPrepared> {
        let k = self.spec.sketch_dim;
        let mut spectra = Vec::with_capacity(inputs.len() * k);
        with_plan(k, |plan| -> Result<()> {
            for x in inputs {
                let v = self.sketch_input(x)?.0;
                let mut w = match &self.rotation {
                    Some(r) => r.dot(&ArrayView1::from(&v)).to_vec(),
                    None => v,
                };
                plan.forward(&mut w);
                spectra.extend(w);
            }
            Ok(())
        })?;
        Ok(QcllPrepared {
            samples: inputs.len(),
            spectra,
        })
    }

    fn sample_count(prepared: &QcllPrepared) -> usize {
        prepared.samples
    }

    fn forward(&self, prepared: &QcllPrepared, theta: &[f64]) -> QcllForward {
        assert_eq!(theta.len(), self.spec.theta_len, "θ length");
        let (k, big_i, c) = (self.spec.sketch_dim, self.spec.outputs, self.observables.len());
        let u = self.weight_spectra(theta);
        let scale = 1.0 / k as f64;
        let mut outputs = vec![ZERO; prepared.samples * big_i];
        let mut values = vec![0.0; prepared.samples * c];
        for (n, (w, out)) in prepared.spectra.chunks(k).zip(outputs.chunks_mut(big_i)).enumerate() {
            for (o, urow) in out.iter_mut().zip(u.chunks(k)) {
                let mut acc = ZERO;
                for (a, b) in urow.iter().zip(w) {
                    acc += a.conj() * b;
                }
                *o = acc * scale;
            }
            for (ci, obs) in self.observables.iter().enumerate() {
                let bv = obs.apply(out);
                values[n * c + ci] = out.iter().zip(&bv).map(|(a, b)| (a.conj() * b).re).sum();
            }
        }
        QcllForward { outputs, values }
    }

    fn values<'a>(&self, forward: &'a QcllForward) -> &'a [f64] {
        &forward.values
    }

    fn backward(&self, prepared: &QcllPrepared, theta: &[f64], forward: &QcllForward, weights: &[f64]) -> Vec<f64> {
        let (k, big_i, p_len) = (self.spec.sketch_dim, self.spec.outputs, self.spec.theta_len);
        let c = self.observables.len();
        assert_eq!(weights.len(), prepared.samples * c, "weight shape");
        // A_ij = (1/K′)·Σ_n (Σ_c w_nc·B_c v_n)_i·conj(W_nj)
        let mut a = vec![ZERO; big_i * k];
        let mut bv = vec![ZERO; big_i];
        for (n, (v, w)) in forward
            .outputs
            .chunks(big_i)
            .zip(prepared.spectra.chunks(k))
            .enumerate()
        {
            bv.iter_mut().for_each(|z| *z = ZERO);
            for (ci, obs) in self.observables.iter().enumerate() {
                let weight = weights[n * c + ci];
                if weight != 0.0 {
                    for (acc, z) in bv.iter_mut().zip(obs.apply(v)) {
                        *acc += z * weight;
                    }
                }
            }
            for (row, &b) in a.chunks_mut(k).zip(&bv) {
                if b != ZERO {
                    for (aij, wj) in row.iter_mut().zip(w) {
                        *aij += b * wj.conj();
                    }
                }
            }
        }
        let scale = 1.0 / k as f64;
        let trig: Vec<(f64, f64)> = theta.iter().map(|t| t.sin_cos()).collect();
        let mut grad = vec![0.0; p_len];
        let mut factors = vec![ZERO; p_len];
        let mut suffix = vec![ZERO; p_len + 1];
        for i in 0..big_i {
            for j in 0..k {
                let aij = a[i * k + j] * scale;
                if aij == ZERO {
                    continue;
                }
                for (p, &(s, cth)) in trig.iter().enumerate() {
                    let idx = (i * p_len + p) * k + j;
                    factors[p] = self.spectra[0][idx] * cth + self.spectra[1][idx] * s;
                }
                suffix[p_len] = Complex64::new(1.0, 0.0);
                for p in (0..p_len).rev() {
                    suffix[p] = suffix[p + 1] * factors[p];
                }
                let mut prefix = Complex64::new(1.0, 0.0);
                for (p, &(s, cth)) in trig.iter().enumerate() {
                    let idx = (i * p_len + p) * k + j;
                    let deriv = self.spectra[1][idx] * cth - self.spectra[0][idx] * s;
                    grad[p] += 2.0 * (prefix * deriv * suffix[p + 1] * aij).re;
                    prefix *= factors[p];
                }
            }
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcl_ref::encode;
    use crate::sketch::{combined_sketch_oracle, kronecker};
    use rand::Rng;

    fn spec(qubits: Vec<usize>, p: usize, k: usize, variant: Variant, seed: u64) -> QcllSpec {
        QcllSpec {
            qubits_per_dim: qubits,
            sketch_dim: k,
            theta_len: p,
            outputs: 10,
            heads: 1,
            variant,
            seed,
        }
    }

    fn random_theta(p: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..p).map(|_| rng.random_range(0.0..2.0 * PI)).collect()
    }

    fn max_dev(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn defaults_match_paired_circuit() {
        let s = QcllSpec::with_defaults(vec![6], 6, 1, Variant::Plain, 0);
        assert_eq!((s.sketch_dim, s.theta_len, s.outputs), (100, 36, 10));
        assert_eq!(default_outputs(3), 15);
    }

    #[test]
    fn input_sketch_matches_oracle_on_statevector() {
        for q in 1..=6 {
            let model = QcllModel::new(spec(vec![q], 3, 16, Variant::Plain, q as u64)).unwrap();
            let x = [0.37];
            let psi = encode(&x, model.encoding()).unwrap();
            let real: Vec<f64> = psi.0.iter().map(|z| z.re).collect();
            let oracle = combined_sketch_oracle(model.input_sketches())
                .unwrap()
                .apply(&real)
                .unwrap();
            assert!(max_dev(&model.sketch_input(&x).unwrap().0, &oracle.0) < 1e-10);
        }
    }

    #[test]
    fn input_domain_is_enforced() {
        let model = QcllModel::new(spec(vec![2], 2, 8, Variant::Plain, 0)).unwrap();
        assert!(model.sketch_input(&[1.2]).is_err());
        assert!(model.sketch_input(&[1.0]).is_ok());
    }

    #[test]
    fn zero_theta_weight_is_sketched_first_basis_vector() {
        let model = QcllModel::new(spec(vec![2], 5, 16, Variant::Plain, 3)).unwrap();
        let mut e1 = vec![0.0; 32];
        e1[0] = 1.0;
        for i in [0, 7] {
            let oracle = combined_sketch_oracle(model.weight_sketches(i).unwrap())
                .unwrap()
                .apply(&e1)
                .unwrap();
            assert!(max_dev(&model.sketch_weight(&[0.0; 5], i).unwrap().0, &oracle.0) < 1e-10);
        }
        assert!(model.sketch_weight(&[0.0; 5], 10).is_err());
        assert!(model.sketch_weight(&[0.0; 4], 0).is_err());
    }

    #[test]
    fn weight_sets_are_distinct() {
        let model = QcllModel::new(spec(vec![2], 4, 32, Variant::Plain, 3)).unwrap();
        let theta = random_theta(4, 1);
        assert_ne!(
            model.sketch_weight(&theta, 0).unwrap(),
            model.sketch_weight(&theta, 1).unwrap()
        );
    }

    #[test]
    fn zero_input_sketch_gives_zero_output() {
        let model = QcllModel::new(spec(vec![2], 4, 16, Variant::Rotated, 3)).unwrap();
        let out = model
            .output_from_input_sketch(&SketchVector::zeros(16), &random_theta(4, 2))
            .unwrap();
        assert!(out.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn identity_rotation_reproduces_plain_outputs() {
        let plain = QcllModel::new(spec(vec![1, 2], 4, 12, Variant::Plain, 8)).unwrap();
        let mut rotated = plain.clone();
        rotated
            .set_rotation(Array2::eye(12).mapv(|v: f64| Complex64::new(v, 0.0)))
            .unwrap();
        let theta = random_theta(4, 5);
        let x = [0.2, -0.6];
        assert!(
            max_dev(
                &plain.output_vector(&x, &theta).unwrap(),
                &rotated.output_vector(&x, &theta).unwrap()
            ) < 1e-14
        );
        assert!(rotated.set_rotation(Array2::from_elem((12, 12), ZERO)).is_err());
    }

    #[test]
    fn outputs_are_inner_products_of_sketches() {
        let model = QcllModel::new(spec(vec![3], 6, 20, Variant::Plain, 4)).unwrap();
        let theta = random_theta(6, 9);
        let x = [-0.45];
        let v_in = model.sketch_input(&x).unwrap();
        let out = model.output_vector(&x, &theta).unwrap();
        for (i, o) in out.iter().enumerate() {
            let direct = estimate_inner(&model.sketch_weight(&theta, i).unwrap(), &v_in).unwrap();
            assert!((o - direct).norm() < 1e-14);
        }
    }

    #[test]
    fn predict_trivia() {
        let model = QcllModel::new(spec(vec![2], 4, 16, Variant::Plain, 1)).unwrap();
        let params = Params {
            a: vec![0.0],
            b: vec![0.3],
            theta: random_theta(4, 1),
        };
        for x in [-0.9, 0.0, 0.5] {
            assert_eq!(
                model.predict(&params, &[x], &LossSpec::SquaredError).unwrap(),
                vec![0.3]
            );
        }
    }

    #[test]
    fn identity_readout_sums_squared_outputs() {
        let identity = Observable::Diagonal(vec![1.0; 10]);
        let model = QcllModel::with_observables(spec(vec![2], 4, 16, Variant::Plain, 2), vec![identity]).unwrap();
        let theta = random_theta(4, 3);
        let x = [0.7];
        let v_in = model.sketch_input(&x).unwrap();
        let direct: f64 = (0..10)
            .map(|i| {
                estimate_inner(&model.sketch_weight(&theta, i).unwrap(), &v_in)
                    .unwrap()
                    .norm_sqr()
            })
            .sum();
        let params = Params {
            a: vec![1.5],
            b: vec![-0.2],
            theta,
        };
        let y = model.predict(&params, &x, &LossSpec::SquaredError).unwrap()[0];
        assert!((y - (1.5 * direct - 0.2)).abs() < 1e-13);
    }

    #[test]
    fn quadratic_form_is_real() {
        let mut rng = rng_from_seed(12);
        let mut m = Array2::from_elem((10, 10), ZERO);
        for i in 0..10 {
            for j in 0..=i {
                let z = Complex64::new(
                    rng.random_range(-1.0..1.0),
                    if i == j { 0.0 } else { rng.random_range(-1.0..1.0) },
                );
                m[[i, j]] = z;
                m[[j, i]] = z.conj();
            }
        }
        let obs = Observable::dense(m).unwrap();
        for seed in 0..10 {
            let model =
                QcllModel::with_observables(spec(vec![3], 5, 24, Variant::Rotated, seed), vec![obs.clone()]).unwrap();
            let v = model.output_vector(&[0.1], &random_theta(5, seed)).unwrap();
            assert!(obs.quadratic_form(&v).unwrap().im.abs() < 1e-12);
        }
    }

    #[test]
    fn shift_gradient_special_cases() {
        let model = QcllModel::new(spec(vec![2], 1, 16, Variant::Plain, 6)).unwrap();
        let grad = model.output_gradient(&[0.3], &[0.0]).unwrap();
        let at_half_pi = model.output_vector(&[0.3], &[FRAC_PI_2]).unwrap();
        for i in 0..10 {
            assert!((grad[[i, 0]] - at_half_pi[i]).norm() < 1e-14);
        }
        let theta = random_theta(1, 4);
        let base = model.output_vector(&[0.3], &theta).unwrap();
        let flipped = model.output_vector(&[0.3], &[theta[0] + PI]).unwrap();
        for (a, b) in base.iter().zip(&flipped) {
            assert!((a + b).norm() < 1e-13);
        }
    }

    #[test]
    fn shift_gradient_matches_finite_differences() {
        let model = QcllModel::new(spec(vec![1, 2], 5, 30, Variant::Rotated, 10)).unwrap();
        let theta = random_theta(5, 11);
        let x = [0.25, -0.8];
        let grad = model.output_gradient(&x, &theta).unwrap();
        let h = 1e-6;
        for p in 0..5 {
            let mut t = theta.clone();
            t[p] += h;
            let up = model.output_vector(&x, &t).unwrap();
            t[p] -= 2.0 * h;
            let down = model.output_vector(&x, &t).unwrap();
            for i in 0..10 {
                let fd = (up[i] - down[i]) / (2.0 * h);
                assert!(
                    (fd - grad[[i, p]]).norm() <= 1e-6 * grad.column(p).iter().map(|z| z.norm()).fold(0.0, f64::max)
                );
            }
        }
    }

    fn batch_matches_direct(variant: Variant) {
        let model = QcllModel::with_observables(
            spec(vec![2, 1], 7, 25, variant, 21),
            vec![
                Observable::projector(10, 0..5).unwrap(),
                Observable::projector(10, 5..10).unwrap(),
            ],
        )
        .unwrap();
        let mut rng = rng_from_seed(3);
        let xs: Vec<Vec<f64>> = (0..6)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let theta = random_theta(7, 4);
        let prepared = model.prepare(&xs).unwrap();
        let fwd = model.forward(&prepared, &theta);
        let weights: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad = model.backward(&prepared, &theta, &fwd, &weights);
        let mut direct_grad = vec![0.0; 7];
        for (n, x) in xs.iter().enumerate() {
            let v = model.output_vector(x, &theta).unwrap();
            assert!(max_dev(&fwd.outputs()[n * 10..(n + 1) * 10], &v) < 1e-10);
            let q = model.readouts(x, &theta).unwrap();
            assert!((q[0] - fwd.values[2 * n]).abs() < 1e-10);
            assert!((q[1] - fwd.values[2 * n + 1]).abs() < 1e-10);
            // ∂(v†Bv)/∂θ_p = 2·Re(∂v†·B·v)
            let dv = model.output_gradient(x, &theta).unwrap();
            for (c, obs) in model.observables().iter().enumerate() {
                let bv = obs.apply(&v);
                for (p, g) in direct_grad.iter_mut().enumerate() {
                    let s: Complex64 = dv.column(p).iter().zip(&bv).map(|(d, b)| d.conj() * b).sum();
                    *g += weights[2 * n + c] * 2.0 * s.re;
                }
            }
        }
        for (a, b) in grad.iter().zip(&direct_grad) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn batch_path_matches_direct_plain() {
        batch_matches_direct(Variant::Plain);
    }

    #[test]
    fn batch_path_matches_direct_rotated() {
        batch_matches_direct(Variant::Rotated);
    }

    #[test]
    fn seeded_models_are_identical() {
        let a = QcllModel::new(spec(vec![3], 6, 50, Variant::Rotated, 77)).unwrap();
        let b = QcllModel::new(spec(vec![3], 6, 50, Variant::Rotated, 77)).unwrap();
        let theta = random_theta(6, 1);
        assert_eq!(
            a.output_vector(&[0.4], &theta).unwrap(),
            b.output_vector(&[0.4], &theta).unwrap()
        );
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = spec(vec![2, 3], 9, 40, Variant::Rotated, 5);
        let text = serde_json::to_string(&s).unwrap();
        let back: QcllSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let (m1, m2) = (QcllModel::new(s).unwrap(), QcllModel::new(back).unwrap());
        assert_eq!(m1.input_sketches(), m2.input_sketches());
        assert!(serde_json::from_str::<QcllSpec>(&text.replace("\"seed\"", "\"sed\"")).is_err());
    }

    #[test]
    fn kronecker_of_weight_factors_is_unit_norm() {
        let theta = random_theta(5, 2);
        let factors: Vec<[f64; 2]> = theta.iter().map(|t| [t.cos(), t.sin()]).collect();
        let norm: f64 = kronecker(&factors).iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn readout_count_must_fit_outputs() {
        let mut s = spec(vec![2], 2, 8, Variant::Plain, 0);
        s.heads = 3;
        assert!(QcllModel::new(s).is_err());
    }
}
