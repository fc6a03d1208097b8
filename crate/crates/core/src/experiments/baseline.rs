use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TaskKind};
use crate::error::{invalid, Error, Result};

/// Products `Π_d x_d^{a_d}·√(1−x_d²)^{Q_d−a_d}` over every exponent choice,
/// first dimension most significant and `a_d` descending. For one dimension
/// and `Q_d = 6` this is `x⁶, x⁵√(1−x²), …, (1−x²)³`.
pub fn poly_features(x: &[f64], qubits_per_dim: &[usize]) -> Result<Vec<f64>> {
    if x.len() != qubits_per_dim.len() {
        return Err(invalid(format!(
            "input has {} dimensions, basis expects {}",
            x.len(),
            qubits_per_dim.len()
        )));
    }
    let mut out = vec![1.0];
    for (d, (&v, &q)) in x.iter().zip(qubits_per_dim).enumerate() {
        if !(v.abs() <= 1.0) {
            return Err(Error::Domain { dim: d, value: v });
        }
        let c = (1.0 - v * v).max(0.0).sqrt();
        let terms: Vec<f64> = (0..=q)
            .rev()
            .map(|a| v.powi(a as i32) * c.powi((q - a) as i32))
            .collect();
        out = out.iter().flat_map(|&p| terms.iter().map(move |t| p * t)).collect();
    }
    Ok(out)
}

/// Least squares over the product basis. Regression fits one coefficient
/// vector; classification fits one per class against one-hot targets and
/// predicts the arg-max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyOls {
    pub qubits_per_dim: Vec<usize>,
    /// One vector per output column.
    pub coefficients: Vec<Vec<f64>>,
    pub kind: TaskKind,
}

impl PolyOls {
    /// Raw linear outputs, one per column.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let phi = poly_features(x, &self.qubits_per_dim)?;
        Ok(self
            .coefficients
            .iter()
            .map(|w| w.iter().zip(&phi).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Fits [`PolyOls`] by an SVD pseudo-inverse, so rank-deficient designs
/// (fewer distinct points than basis functions) give the minimum-norm
/// solution instead of failing.
pub fn baseline_poly_ols(train: &Dataset, qubits_per_dim: usize) -> Result<PolyOls> {
    if train.is_empty() {
        return Err(invalid("baseline needs at least one sample"));
    }
    let qpd = vec![qubits_per_dim; train.dims()];
    let rows = train
        .x
        .iter()
        .map(|x| poly_features(x, &qpd))
        .collect::<Result<Vec<_>>>()?;
    let (n, m) = (rows.len(), rows[0].len());
    let design = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
    let outputs = match train.kind {
        TaskKind::Regression => 1,
        TaskKind::Classification => train.class_count(),
    };
    let targets = DMatrix::from_fn(n, outputs, |i, c| match train.kind {
        TaskKind::Regression => train.y[i],
        TaskKind::Classification => f64::from(u8::from(train.y[i] as usize == c)),
    });
    let svd = design.svd(true, true);
    let cutoff = svd.singular_values.max() * n.max(m) as f64 * f64::EPSILON;
    let solution = svd
        .solve(&targets, cutoff)
        .map_err(|e| Error::Degenerate(format!("least squares failed: {e}")))?;
    Ok(PolyOls {
        qubits_per_dim: qpd,
        coefficients: (0..outputs)
            .map(|c| solution.column(c).iter().copied().collect())
            .collect(),
        kind: train.kind,
    })
}
