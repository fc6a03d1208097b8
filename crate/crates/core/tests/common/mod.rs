//! Random gradient-check instances shared by the gradient and acceptance
//! tests. Errors are normwise relative: `‖g − g_fd‖ / max(‖g_fd‖, 1e-8)`,
//! with central differences of step `1e-5`.
#![allow(dead_code)]

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use qcll_core::optimize::{ExpectationModel, LossSpec, Objective, Params};
use qcll_core::qcl_ref::{
    apply_circuit, encode, expectation, gradient_qcl, CircuitSpec, EncodingSpec, Observable, QclCircuit,
};
use qcll_core::qcll::{QcllModel, QcllSpec, Variant};
use qcll_core::rng::{derive_seed, rng_from_seed, Rng64};
use rand::Rng;

pub const GRADIENT_TOL: f64 = 1e-5;
const H: f64 = 1e-5;

pub fn rel_err(g: &[f64], fd: &[f64]) -> f64 {
    let diff = g.iter().zip(fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / norm.max(1e-8)
}

/// Column `p` holds `(f(t + h·e_p) − f(t − h·e_p)) / 2h`.
fn central(f: impl Fn(&[f64]) -> Vec<f64>, at: &[f64]) -> Vec<Vec<f64>> {
    let mut t = at.to_vec();
    (0..at.len())
        .map(|p| {
            t[p] = at[p] + H;
            let up = f(&t);
            t[p] = at[p] - H;
            let down = f(&t);
            t[p] = at[p];
            up.iter().zip(&down).map(|(u, d)| (u - d) / (2.0 * H)).collect()
        })
        .collect()
}

fn scalar_fd(f: impl Fn(&[f64]) -> f64, at: &[f64]) -> Vec<f64> {
    central(|t| vec![f(t)], at).into_iter().map(|v| v[0]).collect()
}

pub fn inputs(rng: &mut Rng64, dims: usize) -> Vec<f64> {
    (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn angles(rng: &mut Rng64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect()
}

fn random_hermitian(dim: usize, rng: &mut Rng64) -> Observable {
    let mut m = Array2::from_elem((dim, dim), Complex64::new(0.0, 0.0));
    for i in 0..dim {
        m[[i, i]] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
        for j in i + 1..dim {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[[i, j]] = z;
            m[[j, i]] = z.conj();
        }
    }
    Observable::dense(m).unwrap()
}

pub fn random_qcll(rng: &mut Rng64, seed: u64, heads: usize) -> QcllModel {
    let dims = rng.random_range(1..=2);
    let qubits_per_dim: Vec<usize> = (0..dims).map(|_| rng.random_range(1..=3)).collect();
    let variant = if rng.random_bool(0.5) {
        Variant::Plain
    } else {
        Variant::Rotated
    };
    QcllModel::new(QcllSpec {
        qubits_per_dim,
        sketch_dim: [8, 30, 64, 100][rng.random_range(0..4)],
        theta_len: rng.random_range(1..=12),
        outputs: 5 * heads + rng.random_range(0..6),
        heads,
        variant,
        seed,
    })
    .unwrap()
}

pub fn random_qcl(rng: &mut Rng64, seed: u64, heads: usize) -> QclCircuit {
    let dims = rng.random_range(1..=2);
    let qpd: Vec<usize> = (0..dims).map(|_| rng.random_range(1..=3)).collect();
    let q: usize = qpd.iter().sum();
    let dim = 1 << q;
    let observables = (0..heads)
        .map(|c| {
            if rng.random_bool(0.5) && dim >= 5 * (c + 1) {
                Observable::default_for_class(dim, c).unwrap()
            } else {
                random_hermitian(dim, rng)
            }
        })
        .collect();
    let circuit = CircuitSpec::sample(q, rng.random_range(1..=3), seed).unwrap();
    QclCircuit::new(EncodingSpec::new(qpd).unwrap(), circuit, observables).unwrap()
}

/// `∂v̂_out/∂θ` by the π/2 shift against finite differences.
pub fn qcll_shift_error(instance: u64) -> f64 {
    let mut rng = rng_from_seed(derive_seed(11, &[instance]));
    let model = random_qcll(&mut rng, instance, 1);
    let x = inputs(&mut rng, model.encoding().dims());
    let theta = angles(&mut rng, model.spec().theta_len);
    let grad = model.output_gradient(&x, &theta).unwrap();
    let fd = central(
        |t| {
            model
                .output_vector(&x, t)
                .unwrap()
                .iter()
                .flat_map(|z| [z.re, z.im])
                .collect()
        },
        &theta,
    );
    let mut g = Vec::new();
    let mut f = Vec::new();
    for (p, col) in fd.iter().enumerate() {
        g.extend(grad.column(p).iter().flat_map(|z| [z.re, z.im]));
        f.extend_from_slice(col);
    }
    rel_err(&g, &f)
}

/// `∂⟨B⟩/∂θ` by the parameter-shift rule against finite differences.
pub fn qcl_shift_error(instance: u64) -> f64 {
    let mut rng = rng_from_seed(derive_seed(12, &[instance]));
    let model = random_qcl(&mut rng, instance, 1);
    let x = inputs(&mut rng, model.encoding.dims());
    let theta = angles(&mut rng, model.circuit.theta_len());
    let obs = &model.observables[0];
    let input = encode(&x, &model.encoding).unwrap();
    let g = gradient_qcl(&model.circuit, &theta, &x, &model.encoding, obs).unwrap();
    let fd = scalar_fd(
        |t| expectation(&apply_circuit(&model.circuit, t, &input).unwrap(), obs).unwrap(),
        &theta,
    );
    rel_err(&g, &fd)
}

fn cost_gradient_error<M: ExpectationModel>(model: &M, rng: &mut Rng64, loss: LossSpec) -> f64 {
    let heads = loss.heads();
    let xs: Vec<Vec<f64>> = (0..5).map(|_| inputs(rng, model.input_dims())).collect();
    let targets: Vec<f64> = match loss {
        LossSpec::SquaredError => (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
        LossSpec::SoftmaxCrossEntropy { classes } => (0..5).map(|_| rng.random_range(0..classes) as f64).collect(),
    };
    let prepared = model.prepare(&xs).unwrap();
    let objective = Objective::new(model, &prepared, &targets, loss).unwrap();
    let params = Params {
        a: (0..heads).map(|_| rng.random_range(0.0..2.0)).collect(),
        b: (0..heads).map(|_| rng.random_range(-1.0..1.0)).collect(),
        theta: angles(rng, model.theta_len()),
    };
    let (cost, g) = objective.cost_gradient(&params).unwrap();
    assert!((cost - objective.cost(&params).unwrap()).abs() <= 1e-12 * cost.abs().max(1.0));
    let fd = scalar_fd(
        |p| objective.cost(&Params::from_flat(heads, p)).unwrap(),
        &params.to_flat(),
    );
    rel_err(&g, &fd)
}

/// Full `(a, b, θ)` cost gradient of a random QCLL model; even instances use
/// squared error, odd ones softmax cross-entropy with 2 or 3 classes.
pub fn qcll_cost_error(instance: u64) -> f64 {
    let mut rng = rng_from_seed(derive_seed(14, &[instance]));
    let loss = if instance.is_multiple_of(2) {
        LossSpec::SquaredError
    } else {
        LossSpec::SoftmaxCrossEntropy {
            classes: 2 + (instance as usize / 2) % 2,
        }
    };
    let model = random_qcll(&mut rng, instance, loss.heads());
    cost_gradient_error(&model, &mut rng, loss)
}

/// As [`qcll_cost_error`] for the statevector reference.
pub fn qcl_cost_error(instance: u64) -> f64 {
    let mut rng = rng_from_seed(derive_seed(15, &[instance]));
    let loss = if instance.is_multiple_of(2) {
        LossSpec::SquaredError
    } else {
        LossSpec::SoftmaxCrossEntropy { classes: 2 }
    };
    let model = random_qcl(&mut rng, instance, loss.heads());
    cost_gradient_error(&model, &mut rng, loss)
}

/// Largest error of `check` over instances `0..count`.
pub fn worst(count: u64, check: impl Fn(u64) -> f64) -> f64 {
    (0..count).map(check).fold(0.0, f64::max)
}
