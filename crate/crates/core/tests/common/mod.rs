#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use lssvm_rmt::mixture::{toeplitz_cov, unit_spike};
use lssvm_rmt::{Class, KernelProfile, MixtureModel};

/// Explicit inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs())).unwrap();
        a.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let d = a[(col, col)];
        assert!(d.abs() > 1e-300, "singular oracle input");
        for j in 0..n {
            a[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[(i, col)];
                if f != 0.0 {
                    for j in 0..n {
                        a[(i, j)] -= f * a[(col, j)];
                        inv[(i, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
    }
    inv
}

/// `(alpha, b)` from a dense `S^{-1}`.
pub fn oracle_train(gram: &DMatrix<f64>, labels: &[f64], gamma: f64) -> (DVector<f64>, f64) {
    let n = gram.nrows();
    let s = gram + DMatrix::<f64>::identity(n, n) * (n as f64 / gamma);
    let inv = gauss_jordan_inverse(&s);
    let y = DVector::from_column_slice(labels);
    let ones = DVector::<f64>::from_element(n, 1.0);
    let sy = &inv * &y;
    let s1 = &inv * &ones;
    let b = ones.dot(&sy) / ones.dot(&s1);
    (&inv * (y - ones * b), b)
}

/// Kernel entries by a literal double loop.
pub fn naive_gram(data: &DMatrix<f64>, profile: &KernelProfile) -> DMatrix<f64> {
    let (p, n) = data.shape();
    DMatrix::from_fn(n, n, |i, j| {
        let mut d = 0.0;
        for r in 0..p {
            d += (data[(r, i)] - data[(r, j)]).powi(2);
        }
        profile.eval(d / p as f64)
    })
}

pub fn naive_decide(data: &DMatrix<f64>, alpha: &DVector<f64>, b: f64, profile: &KernelProfile, x: &[f64]) -> f64 {
    let (p, n) = data.shape();
    let mut g = b;
    for j in 0..n {
        let mut d = 0.0;
        for r in 0..p {
            d += (x[r] - data[(r, j)]).powi(2);
        }
        g += alpha[j] * profile.eval(d / p as f64);
    }
    g
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random classes with both present, class one first count `n1`.
pub fn random_classes(rng: &mut ChaCha8Rng, n: usize) -> Vec<Class> {
    let n1 = rng.random_range(1..n);
    (0..n).map(|i| if i < n1 { Class::One } else { Class::Two }).collect()
}

/// One of the three kernel kinds with random parameters.
pub fn random_kernel(rng: &mut ChaCha8Rng) -> KernelProfile {
    match rng.random_range(0..3) {
        0 => KernelProfile::gaussian(rng.random_range(0.2..4.0)).unwrap(),
        1 => KernelProfile::polynomial(vec![rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..0.5)]).unwrap(),
        _ => KernelProfile::local(2.0, rng.random_range(1.0..4.0), rng.random_range(-1.0..0.0), rng.random_range(0.0..2.0)).unwrap(),
    }
}

/// Symmetric positive definite `A A' / p + I`.
pub fn random_spd(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    let a = normal_matrix(rng, p, p);
    &a * a.transpose() / p as f64 + DMatrix::identity(p, p)
}

/// Means spiked at coordinates 0 and 1, `C1 = I`,
/// `C2 = (1 + a / sqrt(p)) toeplitz(0.4)`.
pub fn spiked_model(p: usize, spike: f64, a: f64, c1: f64) -> MixtureModel {
    MixtureModel::new(
        unit_spike(p, 0, spike),
        unit_spike(p, 1, spike),
        DMatrix::identity(p, p),
        toeplitz_cov(0.4, 1.0 + a / (p as f64).sqrt(), p),
        c1,
    )
    .unwrap()
}
