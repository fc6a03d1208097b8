//! Discrete Fourier transforms and circular convolution.
//!
//! Forward transforms are unnormalized; the inverse carries the `1/n`
//! factor, so `ifft(fft(a) ⊙ fft(b))` is the circular convolution of `a`
//! and `b` with no extra scaling. Power-of-two lengths use an iterative
//! radix-2 Cooley–Tukey kernel. Every other length goes through Bluestein's
//! chirp transform, which re-expresses the DFT as a convolution evaluated
//! with padded power-of-two transforms, so results are exact (up to
//! rounding) for any `n ≥ 1`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Textbook `O(n²)` DFT: `out[k] = Σ_j v[j]·exp(−2πi·jk/n)`.
pub fn dft_naive(v: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = v.len();
    if n == 0 {
        return Err(invalid("DFT of an empty vector"));
    }
    Ok((0..n)
        .map(|k| {
            v.iter()
                .enumerate()
                .map(|(j, x)| x * unit_root((j * k) % n, n, -1.0))
                .sum()
        })
        .collect())
}

/// Forward DFT.
pub fn fft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    if v.is_empty() {
        return Err(invalid("FFT of an empty vector"));
    }
    let mut out = v.to_vec();
    with_plan(v.len(), |plan| plan.forward(&mut out));
    Ok(out)
}

/// Inverse DFT including the `1/n` normalization.
pub fn ifft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    if v.is_empty() {
        return Err(invalid("inverse FFT of an empty vector"));
    }
    let mut out = v.to_vec();
    with_plan(v.len(), |plan| plan.inverse(&mut out));
    Ok(out)
}

/// `out[k] = Σ_j a[j]·b[(k−j) mod n]`, evaluated through the FFT.
pub fn circular_convolve(a: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.len() != b.len() {
        return Err(invalid(format!(
            "circular convolution of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let fa = fft(a)?;
    let fb = fft(b)?;
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    ifft(&prod)
}

/// `exp(sign·2πi·k/n)`.
fn unit_root(k: usize, n: usize, sign: f64) -> Complex64 {
    Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / n as f64)
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<FftPlan>>> = RefCell::new(HashMap::new());
}

/// Runs `f` with this thread's cached plan for length `n`.
pub fn with_plan<T>(n: usize, f: impl FnOnce(&FftPlan) -> T) -> T {
    let plan = PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| Rc::new(FftPlan::new(n)))
            .clone()
    });
    f(&plan)
}

/// Precomputed tables for transforms of one fixed length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    kind: PlanKind,
}

#[derive(Debug, Clone)]
enum PlanKind {
    Radix2(Radix2),
    Bluestein(Box<Bluestein>),
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "FFT length must be positive");
        let kind = if len.is_power_of_two() {
            PlanKind::Radix2(Radix2::new(len))
        } else {
            PlanKind::Bluestein(Box::new(Bluestein::new(len)))
        };
        Self { len, kind }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform. Panics if `data.len()` differs from the plan length.
    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len, "FFT plan length mismatch");
        match &self.kind {
            PlanKind::Radix2(r) => r.run(data, false),
            PlanKind::Bluestein(b) => b.run(data),
        }
    }

    /// In-place inverse transform with `1/n` scaling.
    pub fn inverse(&self, data: &mut [Complex64]) {
        // ifft(v) = conj(fft(conj(v))) / n
        for x in data.iter_mut() {
            *x = x.conj();
        }
        self.forward(data);
        let scale = 1.0 / self.len as f64;
        for x in data.iter_mut() {
            *x = x.conj() * scale;
        }
    }
}

#[derive(Debug, Clone)]
struct Radix2 {
    len: usize,
    // twiddles[k] = exp(−2πi k / len), k < len/2
    twiddles: Vec<Complex64>,
}

impl Radix2 {
    fn new(len: usize) -> Self {
        let twiddles = (0..len / 2).map(|k| unit_root(k, len, -1.0)).collect();
        Self { len, twiddles }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.len;
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                data.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let t = w * data[start + k + half];
                    let u = data[start + k];
                    data[start + k] = u + t;
                    data[start + k + half] = u - t;
                }
            }
            half *= 2;
        }
    }
}

#[derive(Debug, Clone)]
struct Bluestein {
    len: usize,
    inner: Radix2,
    // chirp[k] = exp(−πi k² / len)
    chirp: Vec<Complex64>,
    // forward transform of the conjugate chirp, wrapped to the padded length
    kernel_spectrum: Vec<Complex64>,
}

impl Bluestein {
    fn new(len: usize) -> Self {
        let padded = (2 * len - 1).next_power_of_two();
        let inner = Radix2::new(padded);
        let chirp: Vec<Complex64> = (0..len)
            .map(|k| {
                // k² mod 2n keeps the angle argument small and exact
                let k2 = (k as u128 * k as u128 % (2 * len as u128)) as f64;
                Complex64::from_polar(1.0, -PI * k2 / len as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); padded];
        kernel[0] = chirp[0].conj();
        for k in 1..len {
            kernel[k] = chirp[k].conj();
            kernel[padded - k] = chirp[k].conj();
        }
        inner.run(&mut kernel, false);
        Self {
            len,
            inner,
            chirp,
            kernel_spectrum: kernel,
        }
    }

    fn run(&self, data: &mut [Complex64]) {
        let padded = self.inner.len;
        let mut work = vec![Complex64::new(0.0, 0.0); padded];
        for (w, (x, c)) in work.iter_mut().zip(data.iter().zip(&self.chirp)) {
            *w = x * c;
        }
        self.inner.run(&mut work, false);
        for (w, k) in work.iter_mut().zip(&self.kernel_spectrum) {
            *w *= k;
        }
        self.inner.run(&mut work, true);
        let scale = 1.0 / padded as f64;
        for (k, out) in data.iter_mut().enumerate().take(self.len) {
            *out = work[k] * scale * self.chirp[k];
        }
    }
}
