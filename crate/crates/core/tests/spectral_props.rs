use num_complex::Complex64;
use proptest::prelude::*;
use qcll_core::spectral::{circular_convolve, dft_naive, fft, ifft};

fn complex_vec(max_len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..max_len)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

fn pair(max_len: usize) -> impl Strategy<Value = (Vec<Complex64>, Vec<Complex64>)> {
    complex_vec(max_len).prop_flat_map(|a| {
        let n = a.len();
        let b = prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), n)
            .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect::<Vec<_>>());
        (Just(a), b)
    })
}

fn max_dev(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn scale(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(1.0, f64::max)
}

/// `Σ_j a_j b_{(k−j) mod n}` by direct summation.
fn direct_convolution(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    (0..n)
        .map(|k| (0..n).map(|j| a[j] * b[(k + n - j) % n]).sum())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fft_matches_naive_dft(v in complex_vec(200)) {
        let tol = 1e-12 * v.len() as f64 * scale(&v);
        prop_assert!(max_dev(&fft(&v).unwrap(), &dft_naive(&v).unwrap()) <= tol);
    }

    #[test]
    fn round_trip_is_identity(v in complex_vec(300)) {
        let back = ifft(&fft(&v).unwrap()).unwrap();
        prop_assert!(max_dev(&back, &v) <= 1e-12 * scale(&v));
    }

    #[test]
    fn fft_is_linear((a, b) in pair(150), alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
        let (ca, cb) = (Complex64::new(alpha, 0.5), Complex64::new(beta, -1.0));
        let mix: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| ca * x + cb * y).collect();
        let (fa, fb) = (fft(&a).unwrap(), fft(&b).unwrap());
        let expected: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| ca * x + cb * y).collect();
        let got = fft(&mix).unwrap();
        prop_assert!(max_dev(&got, &expected) <= 1e-11 * a.len() as f64 * scale(&expected));
    }

    #[test]
    fn parseval_holds(v in complex_vec(257)) {
        let time: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let freq: f64 = fft(&v).unwrap().iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-11 * time.max(1.0));
    }

    #[test]
    fn convolution_matches_direct_sum((a, b) in pair(100)) {
        let expected = direct_convolution(&a, &b);
        let got = circular_convolve(&a, &b).unwrap();
        prop_assert!(max_dev(&got, &expected) <= 1e-11 * a.len() as f64 * scale(&expected));
    }

    #[test]
    fn convolution_commutes((a, b) in pair(120)) {
        let ab = circular_convolve(&a, &b).unwrap();
        let ba = circular_convolve(&b, &a).unwrap();
        prop_assert!(max_dev(&ab, &ba) <= 1e-11 * a.len() as f64 * scale(&ab));
    }

    #[test]
    fn convolution_associates((a, b) in pair(64), seed in any::<u64>()) {
        let c: Vec<Complex64> = (0..a.len())
            .map(|i| Complex64::new(((seed >> (i % 60)) & 7) as f64 - 3.5, (i % 5) as f64))
            .collect();
        let left = circular_convolve(&circular_convolve(&a, &b).unwrap(), &c).unwrap();
        let right = circular_convolve(&a, &circular_convolve(&b, &c).unwrap()).unwrap();
        prop_assert!(max_dev(&left, &right) <= 1e-10 * (a.len() as f64).powi(2) * scale(&left));
    }
}

#[test]
fn delta_transforms_to_ones() {
    for n in [1, 2, 3, 7, 16, 100, 1024] {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[0] = Complex64::new(1.0, 0.0);
        assert!(fft(&v).unwrap().iter().all(|z| (z - 1.0).norm() < 1e-13));
    }
}

#[test]
fn empty_input_is_rejected() {
    assert!(fft(&[]).is_err());
    assert!(ifft(&[]).is_err());
    assert!(circular_convolve(&[Complex64::new(1.0, 0.0)], &[]).is_err());
}
