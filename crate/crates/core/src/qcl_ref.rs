//! Exact statevector reference for quantum circuit learning.
//!
//! Inputs are encoded as the product state `⊗_d ⊗_{Q_d} (x_d, √(1−x_d²))`,
//! transformed by `U(θ) = R_M(θ)U_M ⋯ R_1(θ)U_1` with frozen Haar-random
//! layers `U_m` and per-qubit y-rotations `R_m`, and read out through a
//! Hermitian observable.
//!
//! Qubit ordering is dimension-major, qubit-minor, and qubit 0 is the most
//! significant bit of an amplitude index. The θ vector is layer-major:
//! `θ[m·Q + q]` rotates qubit `q` in layer `m`.

use std::f64::consts::FRAC_PI_4;
use std::ops::Range;

use ndarray::{s, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optimize::ExpectationModel;
use crate::rng::rng_from_seed;

/// Largest qubit count the statevector code will allocate for.
pub const MAX_QUBITS: usize = 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// How many qubits encode each input dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingSpec {
    qubits_per_dim: Vec<usize>,
}

impl EncodingSpec {
    pub fn new(qubits_per_dim: Vec<usize>) -> Result<Self> {
        if qubits_per_dim.is_empty() {
            return Err(invalid("encoding needs at least one input dimension"));
        }
        if qubits_per_dim.contains(&0) {
            return Err(invalid("every input dimension needs at least one qubit"));
        }
        Ok(Self { qubits_per_dim })
    }

    /// `dims` input dimensions with `qubits` qubits each.
    pub fn uniform(dims: usize, qubits: usize) -> Result<Self> {
        Self::new(vec![qubits; dims])
    }

    pub fn dims(&self) -> usize {
        self.qubits_per_dim.len()
    }

    pub fn qubits_per_dim(&self) -> &[usize] {
        &self.qubits_per_dim
    }

    pub fn total_qubits(&self) -> usize {
        self.qubits_per_dim.iter().sum()
    }

    /// The `Q` two-component factors `(x_d, √(1−x_d²))`, in qubit order.
    pub fn factors(&self, x: &[f64]) -> Result<Vec<[f64; 2]>> {
        if x.len() != self.dims() {
            return Err(invalid(format!(
                "input has {} dimensions, encoding expects {}",
                x.len(),
                self.dims()
            )));
        }
        let mut out = Vec::with_capacity(self.total_qubits());
        for (d, (&xd, &q)) in x.iter().zip(&self.qubits_per_dim).enumerate() {
            if !(xd.abs() <= 1.0) {
                return Err(Error::Domain { dim: d, value: xd });
            }
            let comp = (1.0 - xd * xd).max(0.0).sqrt();
            out.extend(std::iter::repeat_n([xd, comp], q));
        }
        Ok(out)
    }
}

pub(crate) fn check_cap(qubits: usize) -> Result<()> {
    if qubits > MAX_QUBITS {
        return Err(Error::StatevectorCap {
            qubits,
            cap: MAX_QUBITS,
        });
    }
    Ok(())
}

/// Unit-norm amplitude vector of length `2^Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector(pub Vec<Complex64>);

impl Statevector {
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Number of qubits, or `None` if the length is not a power of two.
    pub fn qubits(&self) -> Option<usize> {
        let n = self.0.len();
        n.is_power_of_two().then(|| n.trailing_zeros() as usize)
    }
}

/// Product-state encoding of `x`.
pub fn encode(x: &[f64], spec: &EncodingSpec) -> Result<Statevector> {
    check_cap(spec.total_qubits())?;
    let factors = spec.factors(x)?;
    let real = crate::sketch::kronecker(&factors);
    Ok(Statevector(real.into_iter().map(|r| Complex64::new(r, 0.0)).collect()))
}

/// Haar-distributed `dim×dim` unitary: Gram–Schmidt on the columns of a
/// complex Gaussian matrix. Gram–Schmidt leaves the triangular factor with a
/// positive real diagonal, which is the phase convention that makes the
/// result Haar.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Array2<Complex64>> {
    if dim == 0 {
        return Err(invalid("unitary dimension must be positive"));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // columns stored as rows of `cols` for contiguous access
    let mut cols = Array2::<Complex64>::from_shape_fn((dim, dim), |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    for j in 0..dim {
        // two passes of modified Gram–Schmidt for orthogonality to rounding
        for _ in 0..2 {
            for k in 0..j {
                let (done, mut rest) = cols.view_mut().split_at(Axis(0), j);
                let qk = done.row(k);
                let mut v = rest.row_mut(0);
                let proj: Complex64 = qk.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                v.zip_mut_with(&qk, |x, &q| *x -= proj * q);
            }
        }
        let mut v = cols.row_mut(j);
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.mapv_inplace(|z| z / norm);
    }
    Ok(cols.reversed_axes().as_standard_layout().into_owned())
}

/// `max |U†U − I|`.
pub fn unitarity_defect(u: &ArrayView2<Complex64>) -> f64 {
    let adj = u.t().mapv(|z| z.conj());
    let prod = adj.dot(u);
    let mut worst: f64 = 0.0;
    for ((i, j), z) in prod.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((z - target).norm());
    }
    worst
}

/// Applies `⊗_q [[cos θ_q, −sin θ_q], [sin θ_q, cos θ_q]]` in place in `O(Q·2^Q)`.
pub fn rotation_layer(state: &mut [Complex64], angles: &[f64]) -> Result<()> {
    let q = angles.len();
    if q >= usize::BITS as usize || state.len() != 1usize << q {
        return Err(invalid(format!(
            "{} rotation angles for a state of length {}",
            angles.len(),
            state.len()
        )));
    }
    for (qubit, &theta) in angles.iter().enumerate() {
        let mask = 1usize << (q - 1 - qubit);
        let (s, c) = theta.sin_cos();
        for i in 0..state.len() {
            if i & mask == 0 {
                let a = state[i];
                let b = state[i | mask];
                state[i] = a * c - b * s;
                state[i | mask] = a * s + b * c;
            }
        }
    }
    Ok(())
}

/// Frozen circuit structure: `M` layer unitaries on `Q` qubits.
#[derive(Debug, Clone)]
pub struct CircuitSpec {
    qubits: usize,
    layers: Vec<Array2<Complex64>>,
    adjoints: Vec<Array2<Complex64>>,
    seed: Option<u64>,
}

impl CircuitSpec {
    /// Samples `depth` Haar-random layers from `seed`.
    pub fn sample(qubits: usize, depth: usize, seed: u64) -> Result<Self> {
        check_cap(qubits)?;
        if qubits == 0 {
            return Err(invalid("circuit needs at least one qubit"));
        }
        let mut rng = rng_from_seed(seed);
        let layers = (0..depth)
            .map(|_| haar_unitary(1 << qubits, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let mut spec = Self::from_layers(qubits, layers)?;
        spec.seed = Some(seed);
        Ok(spec)
    }

    /// Uses the given layers; each must be a unitary of size `2^Q`.
    pub fn from_layers(qubits: usize, layers: Vec<Array2<Complex64>>) -> Result<Self> {
        check_cap(qubits)?;
        let dim = 1usize << qubits;
        for (m, u) in layers.iter().enumerate() {
            if u.dim() != (dim, dim) {
                return Err(invalid(format!(
                    "layer {m} has shape {:?}, expected {dim}x{dim}",
                    u.dim()
                )));
            }
            let defect = unitarity_defect(&u.view());
            if defect > 1e-10 {
                return Err(invalid(format!("layer {m} is not unitary (defect {defect:.2e})")));
            }
        }
        let adjoints = layers.iter().map(|u| u.t().mapv(|z| z.conj())).collect();
        Ok(Self {
            qubits,
            layers,
            adjoints,
            seed: None,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn theta_len(&self) -> usize {
        self.qubits * self.depth()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn layers(&self) -> &[Array2<Complex64>] {
        &self.layers
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta_len() {
            return Err(invalid(format!(
                "θ has {} angles, circuit needs {}",
                theta.len(),
                self.theta_len()
            )));
        }
        Ok(())
    }
}

/// `U(θ)|ψ⟩`: for each layer, the unitary then the rotations.
pub fn apply_circuit(spec: &CircuitSpec, theta: &[f64], state: &Statevector) -> Result<Statevector> {
    spec.check_theta(theta)?;
    if state.0.len() != spec.dim() {
        return Err(invalid(format!(
            "state of length {} for a {}-qubit circuit",
            state.0.len(),
            spec.qubits
        )));
    }
    let mut psi = ndarray::Array1::from(state.0.clone());
    for (m, u) in spec.layers.iter().enumerate() {
        psi = u.dot(&psi);
        let angles = &theta[m * spec.qubits..(m + 1) * spec.qubits];
        rotation_layer(psi.as_slice_mut().expect("contiguous"), angles)?;
    }
    Ok(Statevector(psi.to_vec()))
}

/// Hermitian readout matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    Diagonal(Vec<f64>),
    Dense(Array2<Complex64>),
}

impl Observable {
    /// Diagonal 0/1 matrix of size `dim` with ones on `support`.
    pub fn projector(dim: usize, support: Range<usize>) -> Result<Self> {
        if support.end > dim || support.is_empty() {
            return Err(invalid(format!(
                "projector support {support:?} does not fit dimension {dim}"
            )));
        }
        let mut d = vec![0.0; dim];
        d[support].iter_mut().for_each(|x| *x = 1.0);
        Ok(Self::Diagonal(d))
    }

    /// The readout used for class `c`: ones on entries `5c..5c+5`.
    /// Class 0 is also the regression readout.
    pub fn default_for_class(dim: usize, class: usize) -> Result<Self> {
        Self::projector(dim, 5 * class..5 * class + 5)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::Diagonal(vec![0.0; dim])
    }

    pub fn dense(matrix: Array2<Complex64>) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c || r == 0 {
            return Err(invalid("observable must be a nonempty square matrix"));
        }
        for i in 0..r {
            for j in 0..=i {
                if (matrix[[i, j]] - matrix[[j, i]].conj()).norm() > 1e-12 {
                    return Err(invalid(format!("observable is not Hermitian at ({i}, {j})")));
                }
            }
        }
        Ok(Self::Dense(matrix))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Diagonal(d) => d.len(),
            Self::Dense(m) => m.nrows(),
        }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        match self {
            Self::Diagonal(d) => d.iter().zip(v).map(|(a, b)| b * *a).collect(),
            Self::Dense(m) => m
                .rows()
                .into_iter()
                .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }

    /// Raw `v†Bv`; the imaginary part is rounding residue.
    pub fn quadratic_form(&self, v: &[Complex64]) -> Result<Complex64> {
        if v.len() != self.dim() {
            return Err(invalid(format!(
                "vector of length {} for an observable of dimension {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(v.iter().zip(self.apply(v)).map(|(a, b)| a.conj() * b).sum())
    }

    /// `B·S` for a batch of column vectors.
    fn apply_columns(&self, states: &Array2<Complex64>) -> Array2<Complex64> {
        match self {
            Self::Diagonal(d) => {
                let mut out = states.clone();
                for (mut row, &w) in out.rows_mut().into_iter().zip(d) {
                    row.mapv_inplace(|z| z * w);
                }
                out
            }
            Self::Dense(m) => m.dot(states),
        }
    }
}

/// `⟨ψ|B|ψ⟩`.
pub fn expectation(state: &Statevector, observable: &Observable) -> Result<f64> {
    Ok(observable.quadratic_form(&state.0)?.re)
}

/// `F(a·⟨ψ_out|B|ψ_out⟩ + b)` for one input.
#[allow(clippy::too_many_arguments)]
pub fn predict_qcl(
    spec: &CircuitSpec,
    theta: &[f64],
    a: f64,
    b: f64,
    x: &[f64],
    encoding: &EncodingSpec,
    observable: &Observable,
    link: impl Fn(f64) -> f64,
) -> Result<f64> {
    let psi = apply_circuit(spec, theta, &encode(x, encoding)?)?;
    Ok(link(a * expectation(&psi, observable)? + b))
}

/// `∂⟨B⟩/∂θ_p` by the two-point parameter-shift rule.
///
/// Each rotation is `exp(−iθY)`, so `⟨B⟩` is a trigonometric polynomial in
/// `2θ_p` and the exact derivative is `⟨B⟩(θ + π/4·e_p) − ⟨B⟩(θ − π/4·e_p)`.
pub fn gradient_qcl(
    spec: &CircuitSpec,
    theta: &[f64],
    x: &[f64],
    encoding: &EncodingSpec,
    observable: &Observable,
) -> Result<Vec<f64>> {
    spec.check_theta(theta)?;
    let input = encode(x, encoding)?;
    let eval = |t: &[f64]| -> Result<f64> { expectation(&apply_circuit(spec, t, &input)?, observable) };
    let mut shifted = theta.to_vec();
    (0..theta.len())
        .map(|p| {
            shifted[p] = theta[p] + FRAC_PI_4;
            let plus = eval(&shifted)?;
            shifted[p] = theta[p] - FRAC_PI_4;
            let minus = eval(&shifted)?;
            shifted[p] = theta[p];
            Ok(plus - minus)
        })
        .collect()
}

/// A QCL circuit with its encoding and readouts, evaluated in batches.
#[derive(Debug, Clone)]
pub struct QclCircuit {
    pub encoding: EncodingSpec,
    pub circuit: CircuitSpec,
    pub observables: Vec<Observable>,
}

impl QclCircuit {
    pub fn new(encoding: EncodingSpec, circuit: CircuitSpec, observables: Vec<Observable>) -> Result<Self> {
        if encoding.total_qubits() != circuit.qubits() {
            return Err(invalid(format!(
                "encoding uses {} qubits but the circuit has {}",
                encoding.total_qubits(),
                circuit.qubits()
            )));
        }
        if observables.is_empty() {
            return Err(invalid("at least one observable is required"));
        }
        if let Some(o) = observables.iter().find(|o| o.dim() != circuit.dim()) {
            return Err(invalid(format!(
                "observable of dimension {} for a {}-dimensional state",
                o.dim(),
                circuit.dim()
            )));
        }
        Ok(Self {
            encoding,
            circuit,
            observables,
        })
    }

    fn rotate_rows(&self, states: &mut Array2<Complex64>, angles: &[f64], inverse: bool) {
        let q = self.circuit.qubits;
        for (qubit, &theta) in angles.iter().enumerate() {
            let mask = 1usize << (q - 1 - qubit);
            let (mut s, c) = theta.sin_cos();
            if inverse {
                s = -s;
            }
            for i in 0..states.nrows() {
                if i & mask != 0 {
                    continue;
                }
                let (mut lo, mut hi) = states.multi_slice_mut((s![i, ..], s![i | mask, ..]));
                ndarray::Zip::from(&mut lo).and(&mut hi).for_each(|a, b| {
                    let (x, y) = (*a, *b);
                    *a = x * c - y * s;
                    *b = x * s + y * c;
                });
            }
        }
    }
}

/// Encoded inputs, one column per sample.
#[derive(Debug, Clone)]
pub struct QclPrepared {
    states: Array2<Complex64>,
}

/// Forward pass cache: the batch after each rotation layer and the readouts.
#[derive(Debug, Clone)]
pub struct QclForward {
    after_layer: Vec<Array2<Complex64>>,
    output: Array2<Complex64>,
    values: Vec<f64>,
}

impl ExpectationModel for QclCircuit {
    type Prepared = QclPrepared;
    type Forward = QclForward;

    fn theta_len(&self) -> usize {
        self.circuit.theta_len()
    }

    fn observable_count(&self) -> usize {
        self.observables.len()
    }

    fn input_dims(&self) -> usize {
        self.encoding.dims()
    }

    fn prepare(&self, inputs: &[Vec<f64>]) -> Result<QclPrepared> {
        let dim = self.circuit.dim();
        let mut states = Array2::from_elem((dim, inputs.len()), ZERO);
        for (n, x) in inputs.iter().enumerate() {
            let psi = encode(x, &self.encoding)?;
            states.column_mut(n).assign(&ndarray::ArrayView1::from(&psi.0));
        }
        Ok(QclPrepared { states })
    }

    fn sample_count(prepared: &QclPrepared) -> usize {
        prepared.states.ncols()
    }

    fn forward(&self, prepared: &QclPrepared, theta: &[f64]) -> QclForward {
        assert_eq!(theta.len(), self.theta_len(), "θ length");
        let q = self.circuit.qubits;
        let mut psi = prepared.states.clone();
        let mut after_layer = Vec::with_capacity(self.circuit.depth());
        for (m, u) in self.circuit.layers.iter().enumerate() {
            psi = u.dot(&psi);
            self.rotate_rows(&mut psi, &theta[m * q..(m + 1) * q], false);
            after_layer.push(psi.clone());
        }
        let n = psi.ncols();
        let c = self.observables.len();
        let mut values = vec![0.0; n * c];
        for (k, obs) in self.observables.iter().enumerate() {
            let applied = obs.apply_columns(&psi);
            for (j, (col, bcol)) in psi.columns().into_iter().zip(applied.columns()).enumerate() {
                values[j * c + k] = col.iter().zip(bcol.iter()).map(|(a, b)| (a.conj() * b).re).sum();
            }
        }
        QclForward {
            after_layer,
            output: psi,
            values,
        }
    }

    fn values<'a>(&self, forward: &'a QclForward) -> &'a [f64] {
        &forward.values
    }

    /// Adjoint differentiation: carries `λ = (suffix)†·Σ_c w_c B_c ψ_out`
    /// backwards through the layers. For qubit `q` of layer `m` the
    /// derivative is `2·Re⟨λ_m|G_q φ_m⟩`, with `φ_m` the batch right after
    /// rotation layer `m` and `G_q = [[0, −1], [1, 0]]` acting on qubit `q`.
    fn backward(&self, _prepared: &QclPrepared, theta: &[f64], forward: &QclForward, weights: &[f64]) -> Vec<f64> {
        let q = self.circuit.qubits;
        let c = self.observables.len();
        let n = forward.output.ncols();
        assert_eq!(weights.len(), n * c, "weight shape");
        let mut lambda = Array2::from_elem(forward.output.dim(), ZERO);
        for (k, obs) in self.observables.iter().enumerate() {
            let mut applied = obs.apply_columns(&forward.output);
            for (j, mut col) in applied.columns_mut().into_iter().enumerate() {
                let w = weights[j * c + k];
                col.mapv_inplace(|z| z * w);
            }
            lambda += &applied;
        }
        let mut grad = vec![0.0; theta.len()];
        for m in (0..self.circuit.depth()).rev() {
            let phi = &forward.after_layer[m];
            for qubit in 0..q {
                let mask = 1usize << (q - 1 - qubit);
                let mut acc = 0.0;
                for i in 0..phi.nrows() {
                    if i & mask != 0 {
                        continue;
                    }
                    let (l0, l1) = (lambda.row(i), lambda.row(i | mask));
                    let (p0, p1) = (phi.row(i), phi.row(i | mask));
                    for j in 0..n {
                        acc += (l1[j].conj() * p0[j] - l0[j].conj() * p1[j]).re;
                    }
                }
                grad[m * q + qubit] = 2.0 * acc;
            }
            self.rotate_rows(&mut lambda, &theta[m * q..(m + 1) * q], true);
            lambda = self.circuit.adjoints[m].dot(&lambda);
        }
        grad
    }
}
