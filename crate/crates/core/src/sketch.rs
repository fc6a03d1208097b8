//! Count sketches and the FFT-based tensor sketch.
//!
//! A count sketch compresses a `K`-dimensional vector to `K′` entries: entry
//! `k` of the source is added, with sign `s(k)`, into bucket `h(k)`. Inner
//! products of sketches are unbiased estimates of the original inner
//! products. The tensor sketch produces the count sketch of a Kronecker
//! product `v₁ ⊗ … ⊗ v_Q` from the factors alone by circularly convolving
//! the per-factor sketches, so the `ΠD_q`-dimensional product is never
//! formed.
//!
//! Buckets are stored 0-based.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;
use crate::spectral::with_plan;

/// Largest source dimension accepted by [`combined_sketch_oracle`].
pub const ORACLE_MAX_DIM: usize = 1 << 24;

/// Sparse `K′×K` sign projection: column `k` holds `signs[k]` at row `buckets[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSketch {
    target_dim: usize,
    buckets: Vec<usize>,
    signs: Vec<i8>,
}

impl CountSketch {
    /// Draws independent uniform bucket and sign tables.
    pub fn sample<R: Rng + ?Sized>(source_dim: usize, target_dim: usize, rng: &mut R) -> Result<Self> {
        if source_dim == 0 || target_dim == 0 {
            return Err(invalid(format!(
                "count sketch dimensions must be positive (K={source_dim}, K'={target_dim})"
            )));
        }
        let buckets = (0..source_dim).map(|_| rng.random_range(0..target_dim)).collect();
        let signs = (0..source_dim)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Ok(Self {
            target_dim,
            buckets,
            signs,
        })
    }

    pub fn from_seed(source_dim: usize, target_dim: usize, seed: u64) -> Result<Self> {
        Self::sample(source_dim, target_dim, &mut rng_from_seed(seed))
    }

    /// Builds a sketch from explicit tables.
    pub fn from_tables(target_dim: usize, buckets: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        if target_dim == 0 || buckets.is_empty() {
            return Err(invalid("count sketch dimensions must be positive"));
        }
        if buckets.len() != signs.len() {
            return Err(invalid("bucket and sign tables differ in length"));
        }
        if let Some(b) = buckets.iter().find(|&&b| b >= target_dim) {
            return Err(invalid(format!("bucket {b} out of range for K'={target_dim}")));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(invalid("signs must be +1 or -1"));
        }
        Ok(Self {
            target_dim,
            buckets,
            signs,
        })
    }

    pub fn source_dim(&self) -> usize {
        self.buckets.len()
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn buckets(&self) -> &[usize] {
        &self.buckets
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// `C·v` in `O(K)` without materializing `C`.
    pub fn apply(&self, v: &[f64]) -> Result<SketchVector> {
        self.check_len(v.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.target_dim];
        for ((&b, &s), &x) in self.buckets.iter().zip(&self.signs).zip(v) {
            out[b].re += f64::from(s) * x;
        }
        Ok(SketchVector(out))
    }

    pub fn apply_complex(&self, v: &[Complex64]) -> Result<SketchVector> {
        self.check_len(v.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.target_dim];
        for ((&b, &s), &x) in self.buckets.iter().zip(&self.signs).zip(v) {
            out[b] += x * f64::from(s);
        }
        Ok(SketchVector(out))
    }

    /// Dense row-major `K′×K` matrix.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.source_dim()]; self.target_dim];
        for (k, (&b, &s)) in self.buckets.iter().zip(&self.signs).enumerate() {
            m[b][k] = f64::from(s);
        }
        m
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.source_dim() {
            return Err(invalid(format!(
                "vector of length {len} given to a count sketch expecting {}",
                self.source_dim()
            )));
        }
        Ok(())
    }
}

/// A length-`K′` count sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchVector(pub Vec<Complex64>);

impl SketchVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `Σ conj(a_k)·b_k`, the sketched estimate of the original inner product.
pub fn estimate_inner(a: &SketchVector, b: &SketchVector) -> Result<Complex64> {
    if a.len() != b.len() {
        return Err(invalid(format!(
            "inner product of sketches of widths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x.conj() * y).sum())
}

/// Factor vectors of a Kronecker product together with one count sketch per factor.
#[derive(Debug, Clone)]
pub struct FactorList {
    pub factors: Vec<Vec<f64>>,
    pub sketches: Vec<CountSketch>,
}

impl FactorList {
    pub fn new(factors: Vec<Vec<f64>>, sketches: Vec<CountSketch>) -> Result<Self> {
        validate_factors(&sketches, &factors)?;
        Ok(Self { factors, sketches })
    }

    pub fn tensor_sketch(&self) -> Result<SketchVector> {
        tensor_sketch(&self.sketches, &self.factors)
    }

    pub fn combined_sketch_oracle(&self) -> Result<CountSketch> {
        combined_sketch_oracle(&self.sketches)
    }

    /// Explicit Kronecker product, first factor most significant.
    pub fn kronecker(&self) -> Vec<f64> {
        kronecker(&self.factors)
    }
}

fn validate_factors<V: AsRef<[f64]>>(sketches: &[CountSketch], factors: &[V]) -> Result<usize> {
    if sketches.is_empty() {
        return Err(invalid("tensor sketch needs at least one factor"));
    }
    if sketches.len() != factors.len() {
        return Err(invalid(format!(
            "{} sketches for {} factors",
            sketches.len(),
            factors.len()
        )));
    }
    let width = sketches[0].target_dim();
    for (q, (c, v)) in sketches.iter().zip(factors).enumerate() {
        if c.target_dim() != width {
            return Err(invalid(format!(
                "factor {q} sketched to width {} but factor 0 to {width}",
                c.target_dim()
            )));
        }
        c.check_len(v.as_ref().len())?;
    }
    Ok(width)
}

/// Count sketch of `⊗_q factors[q]`: sketch each factor, transform, multiply
/// the spectra elementwise and transform back.
pub fn tensor_sketch<V: AsRef<[f64]>>(sketches: &[CountSketch], factors: &[V]) -> Result<SketchVector> {
    let width = validate_factors(sketches, factors)?;
    if sketches.len() == 1 {
        return sketches[0].apply(factors[0].as_ref());
    }
    with_plan(width, |plan| {
        let mut product = vec![Complex64::new(1.0, 0.0); width];
        for (c, v) in sketches.iter().zip(factors) {
            let mut spectrum = c.apply(v.as_ref())?.0;
            plan.forward(&mut spectrum);
            for (p, s) in product.iter_mut().zip(&spectrum) {
                *p *= s;
            }
        }
        plan.inverse(&mut product);
        Ok(SketchVector(product))
    })
}

/// The single `K′×ΠD_q` count sketch equivalent to the tensor sketch:
/// bucket `(Σ_q h_q(k_q)) mod K′` and sign `Π_q s_q(k_q)`, with the multi-index
/// flattened first-factor-major.
pub fn combined_sketch_oracle(sketches: &[CountSketch]) -> Result<CountSketch> {
    let Some(first) = sketches.first() else {
        return Err(invalid("combined sketch needs at least one factor"));
    };
    let width = first.target_dim();
    let mut total: usize = 1;
    for c in sketches {
        if c.target_dim() != width {
            return Err(invalid("factor sketches disagree on K'"));
        }
        total = total
            .checked_mul(c.source_dim())
            .filter(|&t| t <= ORACLE_MAX_DIM)
            .ok_or_else(|| invalid(format!("product dimension exceeds {ORACLE_MAX_DIM}")))?;
    }
    let mut buckets = vec![0usize];
    let mut signs = vec![1i8];
    for c in sketches {
        let mut nb = Vec::with_capacity(buckets.len() * c.source_dim());
        let mut ns = Vec::with_capacity(nb.capacity());
        for (&b, &s) in buckets.iter().zip(&signs) {
            for (&cb, &cs) in c.buckets.iter().zip(&c.signs) {
                nb.push((b + cb) % width);
                ns.push(s * cs);
            }
        }
        buckets = nb;
        signs = ns;
    }
    CountSketch::from_tables(width, buckets, signs)
}

/// `⊗_q factors[q]` with the first factor occupying the most significant index.
pub fn kronecker<V: AsRef<[f64]>>(factors: &[V]) -> Vec<f64> {
    let mut out = vec![1.0];
    for f in factors {
        let f = f.as_ref();
        out = out.iter().flat_map(|&a| f.iter().map(move |&b| a * b)).collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn dense_apply(c: &CountSketch, v: &[f64]) -> Vec<f64> {
        c.to_dense()
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let a = CountSketch::from_seed(2, 100, 7).unwrap();
        let b = CountSketch::from_seed(2, 100, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_dimensions_rejected() {
        let mut rng = rng_from_seed(0);
        assert!(CountSketch::sample(0, 3, &mut rng).is_err());
        assert!(CountSketch::sample(3, 0, &mut rng).is_err());
    }

    #[test]
    fn three_by_five_has_one_signed_entry_per_column() {
        let c = CountSketch::from_seed(5, 3, 11).unwrap();
        let dense = c.to_dense();
        assert_eq!(dense.len(), 3);
        let nonzeros: Vec<f64> = dense.iter().flatten().copied().filter(|&x| x != 0.0).collect();
        assert_eq!(nonzeros.len(), 5);
        assert!(nonzeros.iter().all(|&x| x == 1.0 || x == -1.0));
        for k in 0..5 {
            assert_eq!(dense.iter().filter(|row| row[k] != 0.0).count(), 1);
        }
    }

    #[test]
    fn bucket_and_sign_frequencies_are_uniform() {
        let width = 4;
        let draws = 100_000;
        let mut rng = rng_from_seed(99);
        let mut bucket_counts = vec![0usize; width];
        let mut positive = 0usize;
        for _ in 0..draws {
            let c = CountSketch::sample(1, width, &mut rng).unwrap();
            bucket_counts[c.buckets()[0]] += 1;
            positive += usize::from(c.signs()[0] == 1);
        }
        let n = draws as f64;
        let p = 1.0 / width as f64;
        let se = (p * (1.0 - p) / n).sqrt();
        for &count in &bucket_counts {
            assert!((count as f64 / n - p).abs() < 4.0 * se);
        }
        assert!((positive as f64 / n - 0.5).abs() < 4.0 * (0.25 / n).sqrt());
    }

    #[test]
    fn identity_tables_reproduce_input() {
        let c = CountSketch::from_tables(3, vec![0, 1, 2], vec![1, 1, 1]).unwrap();
        let out = c.apply(&[0.5, -2.0, 3.0]).unwrap();
        let re: Vec<f64> = out.0.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![0.5, -2.0, 3.0]);
    }

    #[test]
    fn full_collision_sums_signed_entries() {
        let c = CountSketch::from_tables(1, vec![0, 0], vec![1, -1]).unwrap();
        let out = c.apply(&[2.0, 5.0]).unwrap();
        assert_eq!(out.0[0].re, -3.0);
    }

    #[test]
    fn apply_matches_dense_matrix() {
        let c = CountSketch::from_seed(64, 100, 5).unwrap();
        let mut rng = rng_from_seed(6);
        let v: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sparse = c.apply(&v).unwrap();
        for (a, b) in sparse.0.iter().zip(dense_apply(&c, &v)) {
            assert!((a.re - b).abs() < 1e-12);
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn apply_rejects_wrong_length() {
        let c = CountSketch::from_seed(4, 10, 1).unwrap();
        assert!(c.apply(&[1.0; 3]).is_err());
    }

    #[test]
    fn flipping_a_sign_flips_its_contribution() {
        let c = CountSketch::from_tables(2, vec![0, 1, 0], vec![1, 1, 1]).unwrap();
        let flipped = CountSketch::from_tables(2, vec![0, 1, 0], vec![1, 1, -1]).unwrap();
        let v = [1.0, 2.0, 4.0];
        let a = c.apply(&v).unwrap();
        let b = flipped.apply(&v).unwrap();
        assert_eq!(a.0[0].re - b.0[0].re, 8.0);
        assert_eq!(a.0[1], b.0[1]);
    }

    #[test]
    fn inner_with_zero_is_zero() {
        let a = SketchVector::zeros(5);
        let b = SketchVector(vec![Complex64::new(1.0, 2.0); 5]);
        assert_eq!(estimate_inner(&a, &b).unwrap(), Complex64::new(0.0, 0.0));
        assert!(estimate_inner(&a, &SketchVector::zeros(4)).is_err());
    }

    #[test]
    fn single_factor_tensor_sketch_is_plain_apply() {
        let c = CountSketch::from_seed(2, 16, 3).unwrap();
        let v = vec![0.6, 0.8];
        let ts = tensor_sketch(std::slice::from_ref(&c), std::slice::from_ref(&v)).unwrap();
        assert_eq!(ts, c.apply(&v).unwrap());
        assert_eq!(combined_sketch_oracle(std::slice::from_ref(&c)).unwrap(), c);
    }

    /// Expands the circular convolution of the per-factor sketches over every
    /// index combination and compares against the combined sketch.
    #[test]
    fn brute_force_convolution_expansion_matches_combined_sketch() {
        for width in 1..=8 {
            for seed in 0..20u64 {
                let c1 = CountSketch::from_seed(2, width, seed * 2).unwrap();
                let c2 = CountSketch::from_seed(2, width, seed * 2 + 1).unwrap();
                let v1 = [0.3 + seed as f64 * 0.01, -0.7];
                let v2 = [1.1, 0.25 - seed as f64 * 0.02];
                // out[k] = Σ_{k1,k2} s1 s2 v1 v2 [h1 + h2 ≡ k mod K']
                let mut expanded = vec![0.0; width];
                for (k1, x1) in v1.iter().enumerate() {
                    for (k2, x2) in v2.iter().enumerate() {
                        let b = (c1.buckets()[k1] + c2.buckets()[k2]) % width;
                        expanded[b] += f64::from(c1.signs()[k1] * c2.signs()[k2]) * x1 * x2;
                    }
                }
                let sketches = [c1, c2];
                let combined = combined_sketch_oracle(&sketches).unwrap();
                let via_oracle = combined.apply(&kronecker(&[v1, v2])).unwrap();
                let via_fft = tensor_sketch(&sketches, &[v1, v2]).unwrap();
                for ((o, f), e) in via_oracle.0.iter().zip(&via_fft.0).zip(&expanded) {
                    assert!((o.re - e).abs() < 1e-12);
                    assert!((f - o).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn degenerate_tables_combine_to_constant_hash() {
        let c = CountSketch::from_tables(5, vec![0, 0], vec![1, 1]).unwrap();
        let combined = combined_sketch_oracle(&[c.clone(), c.clone(), c]).unwrap();
        assert_eq!(combined.source_dim(), 8);
        assert!(combined.buckets().iter().all(|&b| b == 0));
        assert!(combined.signs().iter().all(|&s| s == 1));
    }

    #[test]
    fn mismatched_widths_rejected() {
        let a = CountSketch::from_seed(2, 4, 1).unwrap();
        let b = CountSketch::from_seed(2, 5, 2).unwrap();
        let f = [[1.0, 0.0], [0.0, 1.0]];
        assert!(tensor_sketch(&[a.clone(), b.clone()], &f).is_err());
        assert!(combined_sketch_oracle(&[a, b]).is_err());
    }

    #[test]
    fn oracle_rejects_oversized_products() {
        let c = CountSketch::from_seed(2, 4, 1).unwrap();
        let many = vec![c; 25];
        assert!(combined_sketch_oracle(&many).is_err());
    }
}
