//! Large-dimensional predictions for LS-SVM on two-class Gaussian mixtures.
//!
//! With `tau = (2/p) tr(c1 C1 + c2 C2)` and `f, f', f''` the kernel profile
//! and its derivatives at `tau`, the decision score of a new point of class
//! `a` behaves like
//!
//! ```text
//! g(x) ~ c2 - c1 + gamma (P -/+ 2 c1 c2 c_b D)
//! ```
//!
//! where the informative term `D` is deterministic and the noise term `P`
//! is linear in the test point's latent noise. Both are of order `1/n`;
//! the score is asymptotically `N(E_a, Var_a)`.
//!
//! `P` and the random equivalent are computed from the latent variables of
//! a sampled dataset. They exist to validate convergence of the exact
//! decision function, not to estimate anything from data.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{KernelProfile, LocalDerivatives};
use crate::lssvm::{Class, LabelConvention};
use crate::mixture::{LatentDataset, MixtureModel, Moments};

/// `(2/n) sum_i ||x_i - xbar||^2 / p` over the columns of `x`.
pub fn estimate_tau(x: &DMatrix<f64>) -> Result<f64> {
    let (p, n) = x.shape();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least two samples, got {n}")));
    }
    let mean = x.column_mean();
    let total: f64 = x.column_iter().map(|c| (c - &mean).norm_squared()).sum();
    Ok(2.0 / n as f64 * total / p as f64)
}

/// `D = -(2 f'/p) ||mu2-mu1||^2 + (f''/p^2) (tr(C2-C1))^2 + (2 f''/p^2) tr((C2-C1)^2)`.
pub fn informative_term_from(moments: &Moments, d: LocalDerivatives) -> f64 {
    let p = moments.p as f64;
    let tr = moments.tr_diff();
    -2.0 * d.fp / p * moments.mean_gap_sq + d.fpp / (p * p) * tr * tr + 2.0 * d.fpp / (p * p) * moments.tr_diff_sq
}

/// Informative term at `tau` of the model's own proportions.
pub fn informative_term(model: &MixtureModel, profile: &KernelProfile) -> f64 {
    let moments = model.moments();
    informative_term_from(&moments, profile.derivatives(moments.tau(model.c1())))
}

/// Class proportions of a labelled sample.
fn proportions(dataset: &LatentDataset) -> Result<(f64, f64)> {
    let (n1, n2) = dataset.counts();
    if n1 == 0 || n2 == 0 {
        return Err(Error::OneClassOnly);
    }
    let n = (n1 + n2) as f64;
    Ok((n1 as f64 / n, n2 as f64 / n))
}

/// Precomputed pieces of `P` that do not depend on the test point.
///
/// `c1`, `c2` and `tau` follow the training sample's class counts.
#[derive(Clone, Debug)]
pub struct NoiseTermPlan {
    c1: f64,
    c2: f64,
    derivs: LocalDerivatives,
    informative: f64,
    /// `Omega P y`, the training-side factor of the first term.
    centered_latent: nalgebra::DVector<f64>,
    mean_gap: nalgebra::DVector<f64>,
    n: f64,
    p: f64,
    tr_diff: f64,
}

impl NoiseTermPlan {
    pub fn new(dataset: &LatentDataset, model: &MixtureModel, profile: &KernelProfile) -> Result<Self> {
        let p = model.dim();
        if dataset.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: dataset.dim() });
        }
        let (c1, c2) = proportions(dataset)?;
        let moments = model.moments();
        let derivs = profile.derivatives(moments.tau(c1));
        // y' P = (y - (c2 - c1) 1)' for standard labels.
        let shift = c2 - c1;
        let centered: Vec<f64> = dataset.classes.iter().map(|c| c.label() - shift).collect();
        let centered_latent = &dataset.omega * nalgebra::DVector::from_vec(centered);
        Ok(NoiseTermPlan {
            c1,
            c2,
            derivs,
            informative: informative_term_from(&moments, derivs),
            centered_latent,
            mean_gap: model.mean(Class::Two) - model.mean(Class::One),
            n: dataset.len() as f64,
            p: p as f64,
            tr_diff: moments.tr_diff(),
        })
    }

    /// `P` for a test point with latents `(omega_x, psi_x)`.
    pub fn noise_term(&self, omega_x: &[f64], psi_x: f64) -> Result<f64> {
        if omega_x.len() != self.mean_gap.len() {
            return Err(Error::DimensionMismatch { expected: self.mean_gap.len(), got: omega_x.len() });
        }
        let LocalDerivatives { fp, fpp, .. } = self.derivs;
        let w = nalgebra::DVectorView::from_slice(omega_x, omega_x.len());
        let c12 = self.c1 * self.c2;
        Ok(-2.0 * fp / self.n * self.centered_latent.dot(&w) - 4.0 * c12 * fp / self.p.sqrt() * self.mean_gap.dot(&w)
            + 2.0 * c12 * fpp * psi_x * self.tr_diff / self.p)
    }

    /// Random equivalent of `g(x)` for a test point of `test_class`.
    pub fn random_equivalent(&self, omega_x: &[f64], psi_x: f64, test_class: Class, gamma: f64) -> Result<f64> {
        let noise = self.noise_term(omega_x, psi_x)?;
        Ok(random_equivalent_from(noise, self.informative, test_class, self.c1, self.c2, gamma))
    }

    pub fn informative(&self) -> f64 {
        self.informative
    }
}

/// `c2 - c1 + gamma (P - 2 c1 c2^2 D)` for class one,
/// `c2 - c1 + gamma (P + 2 c1^2 c2 D)` for class two.
pub fn random_equivalent_from(noise: f64, informative: f64, test_class: Class, c1: f64, c2: f64, gamma: f64) -> f64 {
    let signal = match test_class {
        Class::One => -2.0 * c1 * c2 * c2 * informative,
        Class::Two => 2.0 * c1 * c1 * c2 * informative,
    };
    c2 - c1 + gamma * (noise + signal)
}

/// Noise term `P` for one test point; standard labels are assumed.
pub fn noise_term(
    dataset: &LatentDataset,
    model: &MixtureModel,
    omega_x: &[f64],
    psi_x: f64,
    profile: &KernelProfile,
) -> Result<f64> {
    NoiseTermPlan::new(dataset, model, profile)?.noise_term(omega_x, psi_x)
}

pub fn random_equivalent(
    dataset: &LatentDataset,
    model: &MixtureModel,
    omega_x: &[f64],
    psi_x: f64,
    test_class: Class,
    gamma: f64,
    profile: &KernelProfile,
) -> Result<f64> {
    NoiseTermPlan::new(dataset, model, profile)?.random_equivalent(omega_x, psi_x, test_class, gamma)
}

/// Variance components for one class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VarianceTerms {
    /// `f''^2 (tr(C2-C1))^2 tr(C_a^2) / p^4`.
    pub v1: f64,
    /// `2 f'^2 (mu2-mu1)' C_a (mu2-mu1) / p^2`.
    pub v2: f64,
    /// `2 f'^2 (tr(C1 C_a)/c1 + tr(C2 C_a)/c2) / (n p^2)`.
    pub v3: f64,
}

impl VarianceTerms {
    pub fn total(&self) -> f64 {
        self.v1 + self.v2 + self.v3
    }
}

/// Asymptotic Gaussian law of the decision score, per class.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryStats {
    pub tau: f64,
    #[serde(rename = "D")]
    pub informative: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    #[serde(rename = "Var1")]
    pub var1: f64,
    #[serde(rename = "Var2")]
    pub var2: f64,
    #[serde(rename = "V")]
    pub terms: [VarianceTerms; 2],
    pub convention: LabelConvention,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub n: usize,
}

impl TheoryStats {
    pub fn mean(&self, class: Class) -> f64 {
        match class {
            Class::One => self.e1,
            Class::Two => self.e2,
        }
    }

    pub fn var(&self, class: Class) -> f64 {
        match class {
            Class::One => self.var1,
            Class::Two => self.var2,
        }
    }
}

pub fn gaussian_stats_from(
    moments: &Moments,
    c1: f64,
    n: usize,
    gamma: f64,
    derivs: LocalDerivatives,
    convention: LabelConvention,
) -> TheoryStats {
    let c2 = 1.0 - c1;
    let p = moments.p as f64;
    let nf = n as f64;
    let LocalDerivatives { fp, fpp, .. } = derivs;
    let informative = informative_term_from(moments, derivs);

    let tr = moments.tr_diff();
    let terms_for = |tr_ca_sq: f64, gap_ca: f64, tr_c1ca: f64, tr_c2ca: f64| VarianceTerms {
        v1: fpp * fpp * tr * tr * tr_ca_sq / p.powi(4),
        v2: 2.0 * fp * fp * gap_ca / (p * p),
        v3: 2.0 * fp * fp / (nf * p * p) * (tr_c1ca / c1 + tr_c2ca / c2),
    };
    let terms = [
        terms_for(moments.tr_c1c1, moments.mean_gap_c1, moments.tr_c1c1, moments.tr_c1c2),
        terms_for(moments.tr_c2c2, moments.mean_gap_c2, moments.tr_c1c2, moments.tr_c2c2),
    ];

    let (e1, e2, scale) = match convention {
        LabelConvention::Standard => {
            let c12 = c1 * c2;
            (
                c2 - c1 - 2.0 * c2 * c12 * gamma * informative,
                c2 - c1 + 2.0 * c1 * c12 * gamma * informative,
                8.0 * gamma * gamma * c12 * c12,
            )
        }
        LabelConvention::Fisher => (-c2 * gamma * informative, c1 * gamma * informative, 2.0 * gamma * gamma),
    };

    TheoryStats {
        tau: moments.tau(c1),
        informative,
        e1,
        e2,
        var1: scale * terms[0].total(),
        var2: scale * terms[1].total(),
        terms,
        convention,
        gamma,
        c1,
        c2,
        n,
    }
}

/// Gaussian approximation of the score for a model and training size `n`.
///
/// Proportions are the model's `c1`, `c2`.
pub fn gaussian_stats(
    model: &MixtureModel,
    n: usize,
    gamma: f64,
    profile: &KernelProfile,
    convention: LabelConvention,
) -> Result<TheoryStats> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    let moments = model.moments();
    let derivs = profile.derivatives(moments.tau(model.c1()));
    Ok(gaussian_stats_from(&moments, model.c1(), n, gamma, derivs, convention))
}

/// Standard normal upper tail, `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorRates {
    /// `P(g > xi | class one)`.
    pub eps1: f64,
    /// `P(g < xi | class two)`.
    pub eps2: f64,
    /// `c1 eps1 + c2 eps2`.
    pub weighted: f64,
}

/// Probability that a `N(mean, var)` score lands on the wrong side of
/// `threshold`; `wrong_above` says which side is wrong.
fn tail_error(mean: f64, var: f64, threshold: f64, wrong_above: bool) -> f64 {
    // Signed distance from the mean to the threshold, positive when the
    // mean sits on the correct side.
    let margin = if wrong_above { threshold - mean } else { mean - threshold };
    if var > 0.0 {
        q_function(margin / var.sqrt())
    } else if margin > 0.0 {
        0.0
    } else if margin < 0.0 {
        1.0
    } else {
        0.5
    }
}

/// Asymptotic misclassification rates at `threshold`.
///
/// A zero variance makes the class a point mass: its error is 0 or 1
/// depending on the side of the threshold, and 1/2 exactly on it.
pub fn error_rates(stats: &TheoryStats, threshold: f64, c1: f64, c2: f64) -> ErrorRates {
    let eps1 = tail_error(stats.e1, stats.var1, threshold, true);
    let eps2 = tail_error(stats.e2, stats.var2, threshold, false);
    ErrorRates { eps1, eps2, weighted: c1 * eps1 + c2 * eps2 }
}

/// Real roots of `a x^2 + b x + c`, computed without cancellation.
fn real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Threshold minimizing the asymptotic weighted error.
///
/// Where both variances are positive, stationary points solve
/// `c1 phi((xi-E1)/s1)/s1 = c2 phi((xi-E2)/s2)/s2`, a quadratic in `xi`.
/// The root inside `[E1, E2]` is preferred; otherwise the best of the
/// roots and the endpoints `E1 - 6 s1`, `E2 + 6 s2` is returned.
pub fn optimal_threshold(stats: &TheoryStats, c1: f64, c2: f64) -> Result<f64> {
    let (e1, e2) = (stats.e1, stats.e2);
    let (v1, v2) = (stats.var1, stats.var2);
    if v1 == 0.0 && v2 == 0.0 {
        if e1 == e2 {
            return Err(Error::DegenerateStats("both classes collapse to the same point".into()));
        }
        return Ok(0.5 * (e1 + e2));
    }
    let weighted = |xi: f64| error_rates(stats, xi, c1, c2).weighted;
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    let lo = e1.min(e2) - 6.0 * s1.max(s2);
    let hi = e1.max(e2) + 6.0 * s1.max(s2);

    let mut candidates = vec![lo, hi];
    let mut interior = None;
    if v1 > 0.0 && v2 > 0.0 {
        // ln(c1/s1) - (xi-E1)^2/(2 v1) = ln(c2/s2) - (xi-E2)^2/(2 v2)
        let a = 0.5 / v2 - 0.5 / v1;
        let b = e1 / v1 - e2 / v2;
        let c = 0.5 * e2 * e2 / v2 - 0.5 * e1 * e1 / v1 + (c1 * s2 / (c2 * s1)).ln();
        if a == 0.0 && b == 0.0 {
            // Identical Gaussians with c1 = c2: the error is flat.
            return Ok(0.5 * (e1 + e2));
        }
        for r in real_roots(a, b, c) {
            if r.is_finite() {
                if r >= e1.min(e2) && r <= e1.max(e2) && interior.is_none() {
                    interior = Some(r);
                }
                candidates.push(r);
            }
        }
    } else {
        // One point mass: the infimum sits just past it on its correct side.
        let (point, wrong_above) = if v1 == 0.0 { (e1, true) } else { (e2, false) };
        let step = f64::EPSILON * point.abs().max(f64::MIN_POSITIVE.sqrt());
        candidates.push(if wrong_above { point + step } else { point - step });
        candidates.push(point);
    }

    let best = candidates
        .iter()
        .copied()
        .min_by(|a, b| weighted(*a).total_cmp(&weighted(*b)))
        .expect("candidate list is nonempty");
    match interior {
        Some(r) if weighted(r) <= weighted(best) => Ok(r),
        _ => Ok(best),
    }
}

/// How the decision threshold is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    /// Minimizer of the predicted weighted error.
    #[default]
    Optimal,
    /// `xi = 0`.
    Zero,
    /// `xi = c2 - c1` for standard labels, `0` for Fisher labels.
    Bias,
}

impl std::str::FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(ThresholdRule::Optimal),
            "zero" => Ok(ThresholdRule::Zero),
            "bias" => Ok(ThresholdRule::Bias),
            other => Err(Error::Config(format!("unknown threshold rule {other:?}"))),
        }
    }
}

impl ThresholdRule {
    pub fn resolve(self, stats: &TheoryStats) -> Result<f64> {
        match self {
            ThresholdRule::Optimal => optimal_threshold(stats, stats.c1, stats.c2),
            ThresholdRule::Zero => Ok(0.0),
            ThresholdRule::Bias => Ok(match stats.convention {
                LabelConvention::Standard => stats.c2 - stats.c1,
                LabelConvention::Fisher => 0.0,
            }),
        }
    }
}

/// Predicted threshold and error rates for one configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    #[serde(flatten)]
    pub stats: TheoryStats,
    pub threshold: f64,
    #[serde(flatten)]
    pub rates: ErrorRates,
}

pub fn predict(stats: TheoryStats, rule: ThresholdRule) -> Result<Prediction> {
    let threshold = rule.resolve(&stats)?;
    let rates = error_rates(&stats, threshold, stats.c1, stats.c2);
    Ok(Prediction { stats, threshold, rates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{sample, toeplitz_cov, unit_spike};
    use nalgebra::DVector;

    fn stats_with(e1: f64, e2: f64, var1: f64, var2: f64, c1: f64) -> TheoryStats {
        let t = VarianceTerms { v1: 0.0, v2: 0.0, v3: 0.0 };
        TheoryStats {
            tau: 2.0,
            informative: 0.0,
            e1,
            e2,
            var1,
            var2,
            terms: [t, t],
            convention: LabelConvention::Standard,
            gamma: 1.0,
            c1,
            c2: 1.0 - c1,
            n: 100,
        }
    }

    #[test]
    fn estimate_tau_examples() {
        let same = DMatrix::from_fn(3, 4, |i, _| i as f64);
        assert_eq!(estimate_tau(&same).unwrap(), 0.0);
        let x = DMatrix::from_column_slice(2, 2, &[0.0, 0.0, 2.0, 0.0]);
        assert_eq!(estimate_tau(&x).unwrap(), 1.0);
        assert!(estimate_tau(&DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn informative_term_vanishes_for_identical_classes() {
        let p = 6;
        let m = MixtureModel::new(DVector::zeros(p), DVector::zeros(p), toeplitz_cov(0.3, 1.0, p), toeplitz_cov(0.3, 1.0, p), 0.5).unwrap();
        assert_eq!(informative_term(&m, &KernelProfile::gaussian(1.0).unwrap()), 0.0);
    }

    #[test]
    fn informative_term_dense_oracle() {
        // f' = 0, f'' = 2, mu1 = mu2: D = (4/p^2) tr((C2 - I)^2), with the
        // trace of the squared difference formed as an explicit product.
        let p = 512;
        let c2 = toeplitz_cov(0.4, 1.0, p);
        let m = MixtureModel::new(DVector::zeros(p), DVector::zeros(p), DMatrix::identity(p, p), c2.clone(), 0.5).unwrap();
        let k = KernelProfile::local(m.tau(), 4.0, 0.0, 2.0).unwrap();
        let diff = &c2 - DMatrix::<f64>::identity(p, p);
        let oracle = 4.0 / (p * p) as f64 * (&diff * &diff).trace();
        assert!((informative_term(&m, &k) - oracle).abs() < 1e-14);
    }

    #[test]
    fn informative_term_linear_in_mean_gap() {
        let p = 10;
        let k = KernelProfile::local(2.0, 1.0, -0.7, 0.0).unwrap();
        for v in [0.5, 1.0, 3.0] {
            let m = MixtureModel::new(unit_spike(p, 0, v), unit_spike(p, 1, v), DMatrix::identity(p, p), DMatrix::identity(p, p), 0.5).unwrap();
            let expected = -2.0 * -0.7 / p as f64 * 2.0 * v * v;
            assert!((informative_term(&m, &k) - expected).abs() < 1e-15);
        }
    }

    /// P assembled with an explicit centering matrix and latent matrix.
    fn dense_noise_oracle(d: &LatentDataset, m: &MixtureModel, w: &[f64], psi_x: f64, k: &KernelProfile) -> f64 {
        let n = d.len();
        let p = m.dim() as f64;
        let (n1, n2) = d.counts();
        let (c1, c2) = (n1 as f64 / n as f64, n2 as f64 / n as f64);
        let dv = k.derivatives(2.0 / p * (c1 * m.cov(Class::One).trace() + c2 * m.cov(Class::Two).trace()));
        let centering = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
        let y = DVector::from_iterator(n, d.classes.iter().map(|c| c.label()));
        let wx = DVector::from_column_slice(w);
        let first = (y.transpose() * &centering * d.omega.transpose() * &wx)[(0, 0)];
        let gap = m.mean(Class::Two) - m.mean(Class::One);
        let tr = m.cov(Class::Two).trace() - m.cov(Class::One).trace();
        -2.0 * dv.fp / n as f64 * first - 4.0 * c1 * c2 * dv.fp / p.sqrt() * gap.dot(&wx) + 2.0 * c1 * c2 * dv.fpp * psi_x * tr / p
    }

    #[test]
    fn noise_term_matches_dense_oracle() {
        let p = 4;
        let m = MixtureModel::new(unit_spike(p, 0, 1.0), unit_spike(p, 1, -0.5), DMatrix::identity(p, p), toeplitz_cov(0.5, 1.7, p), 0.5).unwrap();
        let d = sample(&m, 2, 4, 21).unwrap();
        let k = KernelProfile::gaussian(0.9).unwrap();
        let w = [0.3, -0.2, 0.15, 0.4];
        let got = noise_term(&d, &m, &w, 0.12, &k).unwrap();
        let want = dense_noise_oracle(&d, &m, &w, 0.12, &k);
        assert!((got - want).abs() < 1e-14 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn noise_term_zero_cases() {
        let p = 4;
        let m = MixtureModel::new(unit_spike(p, 0, 1.0), unit_spike(p, 1, 1.0), DMatrix::identity(p, p), toeplitz_cov(0.5, 1.0, p), 0.5).unwrap();
        let d = sample(&m, 3, 3, 2).unwrap();
        let k = KernelProfile::gaussian(1.0).unwrap();
        assert_eq!(noise_term(&d, &m, &[0.0; 4], 0.0, &k).unwrap(), 0.0);
        // f'(tau) = 0 and equal traces kill every term.
        let flat = KernelProfile::local(m.tau(), 3.0, 0.0, 1.5).unwrap();
        assert_eq!(noise_term(&d, &m, &[0.2, -0.1, 0.4, 0.3], 0.7, &flat).unwrap(), 0.0);
        assert!(noise_term(&d, &m, &[0.0; 3], 0.0, &k).is_err());
    }

    #[test]
    fn random_equivalent_algebra() {
        assert_eq!(random_equivalent_from(0.0, 0.0, Class::One, 0.25, 0.75, 2.0), 0.5);
        let (c1, c2, gamma, d, noise) = (0.3, 0.7, 1.7, 0.04, 0.01);
        let diff = random_equivalent_from(noise, d, Class::Two, c1, c2, gamma) - random_equivalent_from(noise, d, Class::One, c1, c2, gamma);
        assert!((diff - 2.0 * gamma * c1 * c2 * d).abs() < 1e-15);
    }

    #[test]
    fn gaussian_stats_identical_classes() {
        let p = 8;
        let m = MixtureModel::new(DVector::zeros(p), DVector::zeros(p), DMatrix::identity(p, p), DMatrix::identity(p, p), 0.25).unwrap();
        let s = gaussian_stats(&m, 16, 1.0, &KernelProfile::gaussian(1.0).unwrap(), LabelConvention::Standard).unwrap();
        assert_eq!(s.e1, 0.5);
        assert_eq!(s.e2, 0.5);
        assert_eq!(s.var1, s.var2);
        assert_eq!(s.terms[0].v1, 0.0);
        assert_eq!(s.terms[0].v2, 0.0);
        assert!(s.terms[0].v3 > 0.0);
    }

    #[test]
    fn fisher_mean_gap_is_gamma_d() {
        let p = 32;
        let m = MixtureModel::new(unit_spike(p, 0, 2.0), unit_spike(p, 1, 2.0), DMatrix::identity(p, p), toeplitz_cov(0.4, 1.5, p), 0.3).unwrap();
        let k = KernelProfile::gaussian(1.0).unwrap();
        for gamma in [0.5, 1.0, 3.0] {
            let s = gaussian_stats(&m, 64, gamma, &k, LabelConvention::Fisher).unwrap();
            assert!((s.e2 - s.e1 - gamma * s.informative).abs() < 1e-15);
            let st = gaussian_stats(&m, 64, gamma, &k, LabelConvention::Standard).unwrap();
            assert!((st.e2 - st.e1 - 2.0 * m.c1() * m.c2() * gamma * st.informative).abs() < 1e-15);
            let c12 = m.c1() * m.c2();
            assert!((st.var1 - 8.0 * gamma * gamma * c12 * c12 * st.terms[0].total()).abs() < 1e-18);
            assert!((s.var2 - 2.0 * gamma * gamma * s.terms[1].total()).abs() < 1e-18);
        }
    }

    #[test]
    fn v3_halves_when_n_doubles() {
        let p = 16;
        let m = MixtureModel::new(unit_spike(p, 0, 2.0), unit_spike(p, 1, 2.0), DMatrix::identity(p, p), toeplitz_cov(0.4, 1.5, p), 0.5).unwrap();
        let k = KernelProfile::gaussian(1.0).unwrap();
        let a = gaussian_stats(&m, 64, 1.0, &k, LabelConvention::Standard).unwrap();
        let b = gaussian_stats(&m, 128, 1.0, &k, LabelConvention::Standard).unwrap();
        for c in 0..2 {
            assert_eq!(b.terms[c].v3, a.terms[c].v3 / 2.0);
            assert_eq!(b.terms[c].v1, a.terms[c].v1);
            assert_eq!(b.terms[c].v2, a.terms[c].v2);
        }
    }

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        for x in [0.1, 1.0, 2.5, 7.9] {
            assert!((q_function(x) + q_function(-x) - 1.0).abs() < 1e-15);
        }
        assert!((q_function(1.644_853_6) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn q_function_against_reference() {
        // Reference tails from 50-digit arithmetic.
        let cases = [
            (-8.0, 0.99999999999999937838),
            (-3.0, 0.99865010196836990547),
            (-1.0, 0.84134474606854293),
            (0.5, 0.30853753872598689637),
            (1.0, 0.15865525393145705142),
            (2.0, 0.022750131948179207200),
            (3.0, 0.0013498980316300945267),
            (4.0, 3.1671241833119856e-5),
            (5.0, 2.8665157187919391e-7),
            (6.0, 9.8658764503769814e-10),
            (7.0, 1.2798125438858350e-12),
            (8.0, 6.2209605742717841e-16),
        ];
        for (x, want) in cases {
            let rel = (q_function(x) - want).abs() / want;
            assert!(rel < 1e-10, "Q({x}) = {} vs {want}", q_function(x));
        }
    }

    #[test]
    fn error_rate_examples() {
        let s = stats_with(0.0, 0.0, 1.0, 1.0, 0.5);
        let r = error_rates(&s, 0.0, 0.5, 0.5);
        assert_eq!((r.eps1, r.eps2, r.weighted), (0.5, 0.5, 0.5));

        let s = stats_with(-0.1, 0.1, 0.0, 0.0, 0.5);
        assert_eq!(error_rates(&s, 0.0, 0.5, 0.5).weighted, 0.0);
        assert_eq!(error_rates(&s, 0.2, 0.5, 0.5).eps2, 1.0);
        assert_eq!(error_rates(&s, -0.1, 0.5, 0.5).eps1, 0.5);
    }

    #[test]
    fn optimal_threshold_symmetric_case() {
        let s = stats_with(-1.0, 3.0, 2.0, 2.0, 0.5);
        assert!((optimal_threshold(&s, 0.5, 0.5).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn optimal_threshold_flat_case() {
        let s = stats_with(0.2, 0.2, 1.0, 1.0, 0.5);
        let xi = optimal_threshold(&s, 0.5, 0.5).unwrap();
        let at = error_rates(&s, xi, 0.5, 0.5).weighted;
        for k in 0..100 {
            let g = -5.0 + 0.1 * k as f64;
            assert!(error_rates(&s, g, 0.5, 0.5).weighted >= at - 1e-15);
        }
    }

    #[test]
    fn optimal_threshold_beats_grid() {
        for &(e1, e2, v1, v2, c1) in &[(-1.0, 1.0, 0.5, 2.0, 0.3), (0.2, 0.9, 0.04, 0.01, 0.5), (0.0, 0.1, 1.0, 1.0, 0.2)] {
            let s = stats_with(e1, e2, v1, v2, c1);
            let c2 = 1.0 - c1;
            let xi = optimal_threshold(&s, c1, c2).unwrap();
            let best = error_rates(&s, xi, c1, c2).weighted;
            let (lo, hi) = (e1 - 6.0 * f64::sqrt(v1), e2 + 6.0 * f64::sqrt(v2));
            for k in 0..=10_000 {
                let g = lo + (hi - lo) * k as f64 / 10_000.0;
                assert!(best <= error_rates(&s, g, c1, c2).weighted + 1e-14);
            }
        }
    }

    #[test]
    fn optimal_threshold_point_masses() {
        let s = stats_with(-0.1, 0.3, 0.0, 0.0, 0.5);
        assert!((optimal_threshold(&s, 0.5, 0.5).unwrap() - 0.1).abs() < 1e-15);
        let s = stats_with(0.1, 0.1, 0.0, 0.0, 0.5);
        assert!(matches!(optimal_threshold(&s, 0.5, 0.5), Err(Error::DegenerateStats(_))));
        // One point mass: the threshold hugs it and its error vanishes.
        let s = stats_with(0.0, 1.0, 0.0, 0.25, 0.5);
        let xi = optimal_threshold(&s, 0.5, 0.5).unwrap();
        let r = error_rates(&s, xi, 0.5, 0.5);
        assert_eq!(r.eps1, 0.0);
        assert!((r.eps2 - q_function(2.0)).abs() < 1e-12);
    }

    #[test]
    fn threshold_rules() {
        let mut s = stats_with(0.4, 0.6, 0.01, 0.01, 0.25);
        assert_eq!(ThresholdRule::Zero.resolve(&s).unwrap(), 0.0);
        assert_eq!(ThresholdRule::Bias.resolve(&s).unwrap(), 0.5);
        s.convention = LabelConvention::Fisher;
        assert_eq!(ThresholdRule::Bias.resolve(&s).unwrap(), 0.0);
        assert_eq!("optimal".parse::<ThresholdRule>().unwrap(), ThresholdRule::Optimal);
        assert!("median".parse::<ThresholdRule>().is_err());
    }
}
