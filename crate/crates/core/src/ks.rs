//! Kolmogorov-Smirnov statistics for comparing score samples.

use crate::theory::q_function;

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Supremum distance between the empirical CDF of `sample` and `cdf`.
pub fn one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let v = sorted(sample);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// One-sample distance to `N(mean, var)`; a zero variance is a point mass.
pub fn one_sample_normal(sample: &[f64], mean: f64, var: f64) -> f64 {
    if var > 0.0 {
        let sd = var.sqrt();
        one_sample(sample, |x| 1.0 - q_function((x - mean) / sd))
    } else {
        let n = sample.len() as f64;
        let below = sample.iter().filter(|&&x| x < mean).count() as f64 / n;
        let above = sample.iter().filter(|&&x| x > mean).count() as f64 / n;
        below.max(above)
    }
}

/// Two-sample statistic `sup |F_a - F_b|`.
pub fn two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // Series below converges poorly; the tail is 1 to double precision.
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of the two-sample statistic `d`.
pub fn two_sample_pvalue(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sq = ne.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}
