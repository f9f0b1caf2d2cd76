//! Monte Carlo comparison of trained LS-SVMs against the asymptotic theory.
//!
//! Every trial is an independent work item seeded by `mix64(seed, k)`;
//! trials run on the rayon pool and are collected in trial order, so
//! results do not depend on the number of threads.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{n_from_c0, ExperimentConfig, KernelSpec, SweepAxis, VectorSpec};
use crate::error::{Error, Result};
use crate::kernel::KernelProfile;
use crate::ks;
use crate::lssvm::{classify, Class, LabelConvention, TrainedModel};
use crate::mixture::{MixtureModel, MixtureSampler};
use crate::seed::{mix64, rng_from_seed};
use crate::theory::{gaussian_stats, predict, NoiseTermPlan, Prediction, TheoryStats};

pub const DEFAULT_SWEEP_TRIALS: usize = 20;
pub const DEFAULT_HISTOGRAM_TRIALS: usize = 50;

/// Splits `total` as `c1 : 1 - c1`, keeping at least one on each side.
pub fn split_counts(total: usize, c1: f64) -> Result<(usize, usize)> {
    if total < 2 {
        return Err(Error::InvalidParameter(format!("cannot split {total} points into two classes")));
    }
    let first = ((total as f64 * c1).round() as usize).clamp(1, total - 1);
    Ok((first, total - first))
}

/// Misclassification fractions on one test sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EmpiricalError {
    pub eps1: f64,
    pub eps2: f64,
    pub weighted: f64,
}

/// Training and test sizes for one configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Sizes {
    pub n1: usize,
    pub n2: usize,
    pub t1: usize,
    pub t2: usize,
}

impl Sizes {
    pub fn new(n: usize, n_test: usize, c1: f64) -> Result<Self> {
        let (n1, n2) = split_counts(n, c1)?;
        let (t1, t2) = split_counts(n_test.max(2), c1)?;
        Ok(Sizes { n1, n2, t1, t2 })
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn c1(&self) -> f64 {
        self.n1 as f64 / self.n() as f64
    }
}

/// Error fractions of `scores` (class one first, `t1` of them).
fn score_errors(scores: &[f64], t1: usize, threshold: f64, c1: f64) -> EmpiricalError {
    let wrong = |range: &[f64], class: Class| range.iter().filter(|&&s| classify(s, threshold) != class).count();
    let (first, second) = scores.split_at(t1);
    let eps1 = wrong(first, Class::One) as f64 / first.len() as f64;
    let eps2 = wrong(second, Class::Two) as f64 / second.len() as f64;
    EmpiricalError { eps1, eps2, weighted: c1 * eps1 + (1.0 - c1) * eps2 }
}

/// One trial: fresh training sample from `mix64(seed, 0)`, fresh test
/// sample from `mix64(seed, 1)`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_error_with(
    sampler: &MixtureSampler,
    sizes: Sizes,
    gamma: f64,
    profile: &KernelProfile,
    convention: LabelConvention,
    threshold: f64,
    seed: u64,
) -> Result<EmpiricalError> {
    let train = sampler.sample(sizes.n1, sizes.n2, mix64(seed, 0));
    let model = TrainedModel::fit(train.x.clone(), &train.classes, profile.clone(), gamma, convention)?;
    let test = sampler.sample(sizes.t1, sizes.t2, mix64(seed, 1));
    let scores = model.decide_batch(&test.x)?;
    Ok(score_errors(scores.as_slice(), sizes.t1, threshold, sizes.c1()))
}

/// `n_test` test points are split between classes as `n1 : n2`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_error(
    model: &MixtureModel,
    n1: usize,
    n2: usize,
    n_test: usize,
    gamma: f64,
    profile: &KernelProfile,
    convention: LabelConvention,
    threshold: f64,
    seed: u64,
) -> Result<EmpiricalError> {
    if n1 == 0 || n2 == 0 || n_test == 0 {
        return Err(Error::InvalidParameter("sizes must be positive".into()));
    }
    let c1 = n1 as f64 / (n1 + n2) as f64;
    let (t1, t2) = split_counts(n_test.max(2), c1)?;
    let sampler = MixtureSampler::new(model)?;
    empirical_error_with(&sampler, Sizes { n1, n2, t1, t2 }, gamma, profile, convention, threshold, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub error: String,
}

/// Per-trial outcomes, with failed trials kept separately.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trials: Vec<EmpiricalError>,
    pub failures: Vec<TrialFailure>,
}

impl TrialSummary {
    fn collect(results: Vec<Result<EmpiricalError>>) -> Self {
        let mut summary = TrialSummary::default();
        for (trial, r) in results.into_iter().enumerate() {
            match r {
                Ok(e) => summary.trials.push(e),
                Err(e) => summary.failures.push(TrialFailure { trial, error: e.to_string() }),
            }
        }
        summary
    }

    /// Mean weighted error and its standard error `sd / sqrt(trials)`.
    pub fn mean_se(&self) -> (f64, f64) {
        let k = self.trials.len();
        if k == 0 {
            return (f64::NAN, f64::NAN);
        }
        let kf = k as f64;
        let mean = self.trials.iter().map(|t| t.weighted).sum::<f64>() / kf;
        if k == 1 {
            return (mean, 0.0);
        }
        let var = self.trials.iter().map(|t| (t.weighted - mean).powi(2)).sum::<f64>() / (kf - 1.0);
        (mean, (var / kf).sqrt())
    }
}

/// `trials` independent empirical errors seeded by `mix64(seed, k)`.
#[allow(clippy::too_many_arguments)]
pub fn run_trials(
    sampler: &MixtureSampler,
    sizes: Sizes,
    gamma: f64,
    profile: &KernelProfile,
    convention: LabelConvention,
    threshold: f64,
    trials: usize,
    seed: u64,
) -> TrialSummary {
    let results: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|k| empirical_error_with(sampler, sizes, gamma, profile, convention, threshold, mix64(seed, k as u64)))
        .collect();
    TrialSummary::collect(results)
}

/// Model, kernel, sizes and prediction for one grid value.
#[derive(Clone, Debug)]
pub struct PointSetup {
    pub value: f64,
    /// Model with `c1` equal to the exact training proportion.
    pub model: MixtureModel,
    pub profile: KernelProfile,
    pub sizes: Sizes,
    pub prediction: Prediction,
}

fn override_kernel(spec: &KernelSpec, axis: SweepAxis, value: f64, model_tau: f64) -> Result<KernelProfile> {
    match (axis, spec) {
        (SweepAxis::Fp, KernelSpec::Local { f, fpp, .. }) => KernelProfile::local(model_tau, *f, value, *fpp),
        (SweepAxis::Fpp, KernelSpec::Local { f, fp, .. }) => KernelProfile::local(model_tau, *f, *fp, value),
        (SweepAxis::Fp | SweepAxis::Fpp, _) => Err(Error::Config(format!("axis {} needs a local kernel", axis.name()))),
        (SweepAxis::Sigma2, KernelSpec::Gaussian { .. }) => KernelProfile::gaussian(value),
        (SweepAxis::Sigma2, _) => Err(Error::Config("axis sigma2 needs a gaussian kernel".into())),
        _ => spec.resolve(model_tau),
    }
}

/// Resolves the configuration at one grid value of `axis` (or the base
/// configuration when `axis` is `None`).
pub fn point_setup(config: &ExperimentConfig, axis: Option<SweepAxis>, value: f64) -> Result<PointSetup> {
    let settings = &config.experiment;
    let mut spec = config.model.clone();
    match axis {
        Some(SweepAxis::C1) => spec.c1 = value,
        Some(SweepAxis::MuOffset) => {
            spec.mu1 = VectorSpec::Named(format!("unit_spike(0, {value})"));
            spec.mu2 = VectorSpec::Named(format!("unit_spike(1, {value})"));
        }
        _ => {}
    }
    let base = spec.build(&config.base_dir)?;
    let n = match axis {
        Some(SweepAxis::C0) => n_from_c0(spec.p, value)?,
        _ => settings.training_size(spec.p)?,
    };
    let sizes = Sizes::new(n, settings.n_test, base.c1())?;
    let model = base.with_counts(sizes.n1, sizes.n2)?;
    let profile = match axis {
        Some(a) => override_kernel(&config.kernel, a, value, model.tau())?,
        None => config.kernel.resolve(model.tau())?,
    };
    let stats = gaussian_stats(&model, n, settings.gamma, &profile, settings.convention)?;
    let prediction = predict(stats, settings.threshold)?;
    Ok(PointSetup { value, model, profile, sizes, prediction })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub n: usize,
    pub p: usize,
    pub trials: usize,
    pub emp_err: f64,
    pub emp_se: f64,
    pub th_eps1: f64,
    pub th_eps2: f64,
    pub th_weighted: f64,
    pub threshold: f64,
    pub sizes: Sizes,
    pub summary: TrialSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub const CSV_HEADER: &str = "axis,value,n,p,trials,emp_err,emp_se,th_eps1,th_eps2,th_weighted,threshold";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.axis, r.value, r.n, r.p, r.trials, r.emp_err, r.emp_se, r.th_eps1, r.th_eps2, r.th_weighted, r.threshold
            ));
        }
        out
    }

    /// JSON rows; per-trial arrays only with `full`.
    pub fn to_json(&self, full: bool) -> String {
        let value = if full {
            serde_json::to_value(self)
        } else {
            let rows: Vec<_> = self
                .rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "axis": r.axis, "value": r.value, "n": r.n, "p": r.p, "trials": r.trials,
                        "emp_err": r.emp_err, "emp_se": r.emp_se, "th_eps1": r.th_eps1,
                        "th_eps2": r.th_eps2, "th_weighted": r.th_weighted, "threshold": r.threshold,
                        "failures": r.summary.failures,
                    })
                })
                .collect();
            Ok(serde_json::json!({ "rows": rows }))
        };
        serde_json::to_string_pretty(&value.expect("sweep serializes")).expect("json value prints")
    }
}

/// Empirical and predicted error at every grid value, in grid order.
/// `trials = 0` skips the Monte Carlo part.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let trials = config.experiment.trials.unwrap_or(DEFAULT_SWEEP_TRIALS);
    let (axis, values) = match &config.sweep {
        Some(s) if s.values.is_empty() => return Err(Error::Config("sweep grid is empty".into())),
        Some(s) => (Some(s.axis), s.values.clone()),
        None => (None, vec![f64::NAN]),
    };
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let setup = point_setup(config, axis, value)?;
        let summary = if trials > 0 {
            let sampler = MixtureSampler::new(&setup.model)?;
            run_trials(
                &sampler,
                setup.sizes,
                config.experiment.gamma,
                &setup.profile,
                config.experiment.convention,
                setup.prediction.threshold,
                trials,
                config.experiment.seed,
            )
        } else {
            TrialSummary::default()
        };
        let (emp_err, emp_se) = summary.mean_se();
        rows.push(SweepRow {
            axis: axis.map_or("none", SweepAxis::name).to_string(),
            value,
            n: setup.sizes.n(),
            p: setup.model.dim(),
            trials: summary.trials.len(),
            emp_err,
            emp_se,
            th_eps1: setup.prediction.rates.eps1,
            th_eps2: setup.prediction.rates.eps2,
            th_weighted: setup.prediction.rates.weighted,
            threshold: setup.prediction.threshold,
            sizes: setup.sizes,
            summary,
        });
    }
    Ok(SweepResult { rows })
}

/// Pooled decision scores per class next to the predicted Gaussians.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramResult {
    pub stats: TheoryStats,
    pub scores: [Vec<f64>; 2],
    /// One-sample KS distance of each class to `N(E_a, Var_a)`.
    pub ks: [f64; 2],
    pub sample_mean: [f64; 2],
    /// Standard error of each sample mean, from the spread of per-trial
    /// means (scores within a trial share one training set).
    pub sample_se: [f64; 2],
    pub failures: Vec<TrialFailure>,
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    (mean, (var / k).sqrt())
}

fn clustered_mean_se(v: &[f64], cluster: usize) -> (f64, f64) {
    let means: Vec<f64> = v.chunks(cluster).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    if means.len() < 2 {
        return mean_and_se(v);
    }
    let (_, se) = mean_and_se(&means);
    (v.iter().sum::<f64>() / v.len() as f64, se)
}

/// Trains `trials` times on `n` points (split by the model's `c1`) and
/// scores `n_test` fresh test points of each class per trial.
#[allow(clippy::too_many_arguments)]
pub fn run_histogram(
    model: &MixtureModel,
    n: usize,
    gamma: f64,
    profile: &KernelProfile,
    convention: LabelConvention,
    n_test: usize,
    trials: usize,
    seed: u64,
) -> Result<HistogramResult> {
    if trials == 0 || n_test == 0 {
        return Err(Error::InvalidParameter("histogram needs trials and test points".into()));
    }
    let (n1, n2) = split_counts(n, model.c1())?;
    let model = model.with_counts(n1, n2)?;
    let stats = gaussian_stats(&model, n, gamma, profile, convention)?;
    let sampler = MixtureSampler::new(&model)?;
    let results: Vec<Result<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let s = mix64(seed, k as u64);
            let train = sampler.sample(n1, n2, mix64(s, 0));
            let trained = TrainedModel::fit(train.x.clone(), &train.classes, profile.clone(), gamma, convention)?;
            let test = sampler.sample(n_test, n_test, mix64(s, 1));
            Ok(trained.decide_batch(&test.x)?.as_slice().to_vec())
        })
        .collect();

    let mut scores = [Vec::with_capacity(trials * n_test), Vec::with_capacity(trials * n_test)];
    let mut failures = Vec::new();
    for (trial, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => {
                scores[0].extend_from_slice(&s[..n_test]);
                scores[1].extend_from_slice(&s[n_test..]);
            }
            Err(e) => failures.push(TrialFailure { trial, error: e.to_string() }),
        }
    }
    if scores[0].is_empty() {
        return Err(Error::DegenerateStats(format!("all {trials} histogram trials failed")));
    }
    let ks = [
        ks::one_sample_normal(&scores[0], stats.e1, stats.var1),
        ks::one_sample_normal(&scores[1], stats.e2, stats.var2),
    ];
    let (m1, se1) = clustered_mean_se(&scores[0], n_test);
    let (m2, se2) = clustered_mean_se(&scores[1], n_test);
    Ok(HistogramResult { stats, scores, ks, sample_mean: [m1, m2], sample_se: [se1, se2], failures })
}

/// Median of `n |g(x) - ghat(x)|` at one size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub p: usize,
    pub median: f64,
    pub samples: usize,
    pub failures: Vec<TrialFailure>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// `n |g - ghat|` for every test point of one trial, standard labels.
fn convergence_trial(
    sampler: &MixtureSampler,
    sizes: Sizes,
    gamma: f64,
    profile: &KernelProfile,
    seed: u64,
) -> Result<Vec<f64>> {
    let model = sampler.model();
    let train = sampler.sample(sizes.n1, sizes.n2, mix64(seed, 0));
    let trained = TrainedModel::fit(train.x.clone(), &train.classes, profile.clone(), gamma, LabelConvention::Standard)?;
    let plan = NoiseTermPlan::new(&train, model, profile)?;
    let test = sampler.sample(sizes.t1, sizes.t2, mix64(seed, 1));
    let scores = trained.decide_batch(&test.x)?;
    let n = sizes.n() as f64;
    (0..test.len())
        .map(|i| {
            let ghat = plan.random_equivalent(test.omega.column(i).as_slice(), test.psi[i], test.classes[i], gamma)?;
            Ok(n * (scores[i] - ghat).abs())
        })
        .collect()
}

/// For each `(n, p)`, the family `build(p)` is sampled `trials` times with
/// `test_points` test points per trial.
pub fn run_convergence<F>(
    build: F,
    gamma: f64,
    kernel: &KernelSpec,
    sizes: &[(usize, usize)],
    trials: usize,
    test_points: usize,
    seed: u64,
) -> Result<Vec<ConvergenceRow>>
where
    F: Fn(usize) -> Result<MixtureModel>,
{
    let mut rows = Vec::with_capacity(sizes.len());
    for &(n, p) in sizes {
        let family = build(p)?;
        let split = Sizes::new(n, test_points, family.c1())?;
        let model = family.with_counts(split.n1, split.n2)?;
        let profile = kernel.resolve(model.tau())?;
        let sampler = MixtureSampler::new(&model)?;
        let results: Vec<_> = (0..trials)
            .into_par_iter()
            .map(|k| convergence_trial(&sampler, split, gamma, &profile, mix64(seed, k as u64)))
            .collect();
        let mut all = Vec::with_capacity(trials * test_points);
        let mut failures = Vec::new();
        for (trial, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => all.extend(v),
                Err(e) => failures.push(TrialFailure { trial, error: e.to_string() }),
            }
        }
        rows.push(ConvergenceRow { n, p, samples: all.len(), median: median(all), failures });
    }
    Ok(rows)
}

/// Trials on fixed image pools: each trial draws disjoint training and
/// test subsets without replacement from each class pool.
#[allow(clippy::too_many_arguments)]
pub fn run_pool_trials(
    pool1: &DMatrix<f64>,
    pool2: &DMatrix<f64>,
    sizes: Sizes,
    gamma: f64,
    profile: &KernelProfile,
    convention: LabelConvention,
    threshold: f64,
    trials: usize,
    seed: u64,
) -> Result<TrialSummary> {
    if pool1.nrows() != pool2.nrows() {
        return Err(Error::DimensionMismatch { expected: pool1.nrows(), got: pool2.nrows() });
    }
    for (pool, need, digit) in [(pool1, sizes.n1 + sizes.t1, 1u8), (pool2, sizes.n2 + sizes.t2, 2u8)] {
        if pool.ncols() < need {
            return Err(Error::InvalidParameter(format!("class {digit} pool has {} images, need {need}", pool.ncols())));
        }
    }
    let results: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(mix64(seed, k as u64));
            let i1 = sample_indices(&mut rng, pool1.ncols(), sizes.n1 + sizes.t1).into_vec();
            let i2 = sample_indices(&mut rng, pool2.ncols(), sizes.n2 + sizes.t2).into_vec();
            let pick = |a: &[usize], b: &[usize]| {
                let mut m = DMatrix::zeros(pool1.nrows(), a.len() + b.len());
                for (c, &i) in a.iter().enumerate() {
                    m.set_column(c, &pool1.column(i));
                }
                for (c, &i) in b.iter().enumerate() {
                    m.set_column(a.len() + c, &pool2.column(i));
                }
                m
            };
            let train = pick(&i1[..sizes.n1], &i2[..sizes.n2]);
            let test = pick(&i1[sizes.n1..], &i2[sizes.n2..]);
            let classes: Vec<Class> = (0..sizes.n()).map(|i| if i < sizes.n1 { Class::One } else { Class::Two }).collect();
            let trained = TrainedModel::fit(Arc::new(train), &classes, profile.clone(), gamma, convention)?;
            let scores = trained.decide_batch(&test)?;
            Ok(score_errors(scores.as_slice(), sizes.t1, threshold, sizes.c1()))
        })
        .collect();
    Ok(TrialSummary::collect(results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::mixture::unit_spike;
    use crate::theory::ThresholdRule;
    use nalgebra::DVector;

    #[test]
    fn split_examples() {
        assert_eq!(split_counts(256, 0.25).unwrap(), (64, 192));
        assert_eq!(split_counts(2, 0.01).unwrap(), (1, 1));
        assert_eq!(split_counts(5, 0.5).unwrap(), (3, 2));
        assert!(split_counts(1, 0.5).is_err());
    }

    #[test]
    fn point_masses_are_separable() {
        let p = 8;
        let m = MixtureModel::new(unit_spike(p, 0, 1.0), unit_spike(p, 1, 1.0), DMatrix::zeros(p, p), DMatrix::zeros(p, p), 0.5).unwrap();
        let k = KernelProfile::gaussian(1.0).unwrap();
        let stats = gaussian_stats(&m, 16, 1.0, &k, LabelConvention::Standard).unwrap();
        let xi = ThresholdRule::Optimal.resolve(&stats).unwrap();
        let e = empirical_error(&m, 8, 8, 20, 1.0, &k, LabelConvention::Standard, xi, 5).unwrap();
        assert_eq!(e.weighted, 0.0);
    }

    #[test]
    fn identical_classes_are_coin_flips() {
        let p = 32;
        let m = MixtureModel::new(DVector::zeros(p), DVector::zeros(p), DMatrix::identity(p, p), DMatrix::identity(p, p), 0.5).unwrap();
        let k = KernelProfile::gaussian(1.0).unwrap();
        let sampler = MixtureSampler::new(&m).unwrap();
        let sizes = Sizes::new(32, 64, 0.5).unwrap();
        let s = run_trials(&sampler, sizes, 1.0, &k, LabelConvention::Standard, 0.0, 40, 9);
        let (mean, se) = s.mean_se();
        assert!(s.failures.is_empty());
        assert!((mean - 0.5).abs() < 3.0 * se + 1e-12, "{mean} +- {se}");
    }

    #[test]
    fn standard_error_definition() {
        let s = TrialSummary {
            trials: [0.1, 0.3].iter().map(|&w| EmpiricalError { eps1: w, eps2: w, weighted: w }).collect(),
            failures: vec![],
        };
        let (mean, se) = s.mean_se();
        assert!((mean - 0.2).abs() < 1e-15);
        assert!((se - (0.02f64 / 2.0).sqrt()).abs() < 1e-15);
    }

    const SMALL: &str = r#"
        [model]
        p = 16
        mu1 = "unit_spike(0, 2)"
        mu2 = "unit_spike(1, 2)"
        cov1 = "identity"
        cov2 = "toeplitz_sqrtp(0.4, 4)"

        [kernel]
        kind = "gaussian"
        sigma2 = 1.0

        [experiment]
        n = 32
        n_test = 32
        trials = 4
        seed = 11

        [sweep]
        axis = "sigma2"
        values = [0.5, 1.0, 2.0]
    "#;

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let c = ExperimentConfig::from_toml(SMALL).unwrap();
        let a = run_sweep(&c).unwrap();
        let b = run_sweep(&c).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(true), b.to_json(true));
        let values: Vec<f64> = a.rows.iter().map(|r| r.value).collect();
        assert_eq!(values, vec![0.5, 1.0, 2.0]);
        assert_eq!(a.to_csv().lines().next().unwrap(), CSV_HEADER);
        assert_eq!(a.to_csv().lines().count(), 4);
    }

    #[test]
    fn sweep_matches_thread_count() {
        let c = ExperimentConfig::from_toml(SMALL).unwrap();
        let pool = |t| rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
        let one = pool(1).install(|| run_sweep(&c).unwrap().to_json(true));
        let four = pool(4).install(|| run_sweep(&c).unwrap().to_json(true));
        assert_eq!(one, four);
    }

    #[test]
    fn single_point_reduces_to_building_blocks() {
        let mut c = ExperimentConfig::from_toml(SMALL).unwrap();
        c.sweep = None;
        let r = run_sweep(&c).unwrap();
        assert_eq!(r.rows.len(), 1);
        let setup = point_setup(&c, None, f64::NAN).unwrap();
        let e = empirical_error(&setup.model, 16, 16, 32, 1.0, &setup.profile, LabelConvention::Standard, setup.prediction.threshold, mix64(11, 0)).unwrap();
        assert_eq!(r.rows[0].summary.trials[0], e);
        assert_eq!(r.rows[0].th_weighted, setup.prediction.rates.weighted);
    }

    #[test]
    fn failed_trials_are_recorded() {
        let results = vec![Ok(EmpiricalError { eps1: 0.0, eps2: 0.0, weighted: 0.0 }), Err(Error::OneClassOnly)];
        let s = TrialSummary::collect(results);
        assert_eq!(s.trials.len(), 1);
        assert_eq!(s.failures[0].trial, 1);
    }

    #[test]
    fn convergence_degenerate_model() {
        let p = 8;
        let kernel = KernelSpec::Gaussian { sigma2: 1.0 };
        let rows = run_convergence(
            |p| MixtureModel::new(DVector::zeros(p), DVector::zeros(p), DMatrix::zeros(p, p), DMatrix::zeros(p, p), 0.5),
            1.0,
            &kernel,
            &[(8, p)],
            2,
            4,
            1,
        )
        .unwrap();
        assert!(rows[0].median < 1e-9, "{}", rows[0].median);
    }

    #[test]
    fn fisher_histogram_signs() {
        let p = 64;
        let m = MixtureModel::new(unit_spike(p, 0, 3.0), unit_spike(p, 1, 3.0), DMatrix::identity(p, p), crate::mixture::toeplitz_cov(0.4, 1.0 + 5.0 / 8.0, p), 0.25).unwrap();
        let k = KernelProfile::gaussian(1.0).unwrap();
        let h = run_histogram(&m, 64, 1.0, &k, LabelConvention::Fisher, 20, 5, 3).unwrap();
        assert!(h.stats.informative > 0.0);
        assert!(h.sample_mean[0] < 0.0 && h.sample_mean[1] > 0.0);
    }
}
