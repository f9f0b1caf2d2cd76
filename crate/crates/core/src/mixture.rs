//! Two-class Gaussian mixtures with latent-variable tracking.
//!
//! A point of class `a` is `x = mu_a + sqrt(p) * omega` with
//! `omega ~ N(0, C_a / p)`. Samples keep `omega` and
//! `psi = ||omega||^2 - tr(C_a) / p` alongside the data, which is what the
//! random-equivalent predictor in [`crate::theory`] consumes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lssvm::Class;
use crate::seed::rng_from_seed;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct MixtureModel {
    mu1: Arc<DVector<f64>>,
    mu2: Arc<DVector<f64>>,
    cov1: Arc<DMatrix<f64>>,
    cov2: Arc<DMatrix<f64>>,
    c1: f64,
}

/// Scalar summaries of a mixture; every asymptotic formula reduces to these.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub p: usize,
    pub tr_c1: f64,
    pub tr_c2: f64,
    /// `tr(C1^2)`, `tr(C2^2)`, `tr(C1 C2)`.
    pub tr_c1c1: f64,
    pub tr_c2c2: f64,
    pub tr_c1c2: f64,
    /// `tr((C2 - C1)^2)`.
    pub tr_diff_sq: f64,
    /// `||mu2 - mu1||^2`.
    pub mean_gap_sq: f64,
    /// `(mu2 - mu1)' C_a (mu2 - mu1)` for `a = 1, 2`.
    pub mean_gap_c1: f64,
    pub mean_gap_c2: f64,
}

impl Moments {
    pub fn tr_diff(&self) -> f64 {
        self.tr_c2 - self.tr_c1
    }

    /// `(2/p) tr(c1 C1 + c2 C2)`.
    pub fn tau(&self, c1: f64) -> f64 {
        2.0 / self.p as f64 * (c1 * self.tr_c1 + (1.0 - c1) * self.tr_c2)
    }
}

fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn check_symmetric(name: &str, c: &DMatrix<f64>) -> Result<()> {
    let scale = max_abs(c).max(1.0);
    let p = c.nrows();
    for j in 0..p {
        for i in 0..j {
            if (c[(i, j)] - c[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                return Err(Error::InvalidParameter(format!(
                    "{name} is not symmetric at ({i}, {j}): {} vs {}",
                    c[(i, j)],
                    c[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

fn symmetric_eigen(c: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(c.clone(), f64::EPSILON, 0).ok_or(Error::EigFailure)
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm(c: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigen(c)?.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

impl MixtureModel {
    pub fn new(mu1: DVector<f64>, mu2: DVector<f64>, cov1: DMatrix<f64>, cov2: DMatrix<f64>, c1: f64) -> Result<Self> {
        let p = mu1.len();
        if p == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        for (got, what) in [(mu2.len(), "mu2"), (cov1.nrows(), "C1 rows"), (cov1.ncols(), "C1 cols"), (cov2.nrows(), "C2 rows"), (cov2.ncols(), "C2 cols")] {
            if got != p {
                return Err(Error::Config(format!("{what}: expected {p}, got {got}")));
            }
        }
        check_symmetric("C1", &cov1)?;
        check_symmetric("C2", &cov2)?;
        check_proportion(c1)?;
        Ok(MixtureModel {
            mu1: Arc::new(mu1),
            mu2: Arc::new(mu2),
            cov1: Arc::new(cov1),
            cov2: Arc::new(cov2),
            c1,
        })
    }

    /// Same class statistics, new class-one proportion.
    pub fn with_c1(&self, c1: f64) -> Result<Self> {
        check_proportion(c1)?;
        Ok(MixtureModel { c1, ..self.clone() })
    }

    /// Proportions tied to class sizes: `c1 = n1 / (n1 + n2)`.
    pub fn with_counts(&self, n1: usize, n2: usize) -> Result<Self> {
        self.with_c1(n1 as f64 / (n1 + n2) as f64)
    }

    pub fn dim(&self) -> usize {
        self.mu1.len()
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        1.0 - self.c1
    }

    pub fn mean(&self, class: Class) -> &DVector<f64> {
        match class {
            Class::One => &self.mu1,
            Class::Two => &self.mu2,
        }
    }

    pub fn cov(&self, class: Class) -> &DMatrix<f64> {
        match class {
            Class::One => &self.cov1,
            Class::Two => &self.cov2,
        }
    }

    pub fn moments(&self) -> Moments {
        let gap = &*self.mu2 - &*self.mu1;
        let diff = &*self.cov2 - &*self.cov1;
        Moments {
            p: self.dim(),
            tr_c1: self.cov1.trace(),
            tr_c2: self.cov2.trace(),
            tr_c1c1: frobenius_inner(&self.cov1, &self.cov1),
            tr_c2c2: frobenius_inner(&self.cov2, &self.cov2),
            tr_c1c2: frobenius_inner(&self.cov1, &self.cov2),
            tr_diff_sq: frobenius_inner(&diff, &diff),
            mean_gap_sq: gap.norm_squared(),
            mean_gap_c1: gap.dot(&(&*self.cov1 * &gap)),
            mean_gap_c2: gap.dot(&(&*self.cov2 * &gap)),
        }
    }

    /// `(2/p) tr(c1 C1 + c2 C2)`.
    pub fn tau(&self) -> f64 {
        2.0 / self.dim() as f64 * (self.c1 * self.cov1.trace() + self.c2() * self.cov2.trace())
    }

    /// Rejects covariances with an eigenvalue below `-1e-10 ||C||`.
    pub fn check_psd(&self) -> Result<()> {
        for (name, c) in [("C1", &self.cov1), ("C2", &self.cov2)] {
            let eig = symmetric_eigen(c)?;
            check_eigenvalues(name, eig.eigenvalues.as_slice())?;
        }
        Ok(())
    }
}

fn check_proportion(c1: f64) -> Result<()> {
    if !(c1 > 0.0 && c1 < 1.0) {
        return Err(Error::InvalidParameter(format!("class proportion c1 must lie in (0, 1), got {c1}")));
    }
    Ok(())
}

fn check_eigenvalues(name: &str, eigenvalues: &[f64]) -> Result<()> {
    let norm = eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE * norm {
        return Err(Error::InvalidParameter(format!("{name} has negative eigenvalue {min:e}")));
    }
    Ok(())
}

pub fn theoretical_tau(model: &MixtureModel) -> f64 {
    model.tau()
}

/// `{C}_ij = scale * rho^|i - j|`.
pub fn toeplitz_cov(rho: f64, scale: f64, p: usize) -> DMatrix<f64> {
    let powers: Vec<f64> = (0..p).map(|k| rho.powi(k as i32)).collect();
    DMatrix::from_fn(p, p, |i, j| scale * powers[i.abs_diff(j)])
}

/// Vector with `value` at `index` (0-based) and zeros elsewhere.
pub fn unit_spike(p: usize, index: usize, value: f64) -> DVector<f64> {
    let mut v = DVector::zeros(p);
    v[index] = value;
    v
}

/// Samples with their latent noise.
///
/// Columns are laid out class one first, then class two.
#[derive(Clone, Debug)]
pub struct LatentDataset {
    pub x: Arc<DMatrix<f64>>,
    pub classes: Vec<Class>,
    /// Columns `omega_i = (x_i - mu_a) / sqrt(p)`.
    pub omega: DMatrix<f64>,
    /// `psi_i = ||omega_i||^2 - tr(C_a) / p`.
    pub psi: DVector<f64>,
}

impl LatentDataset {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn counts(&self) -> (usize, usize) {
        crate::lssvm::class_counts(&self.classes)
    }

    /// Column `i` moved to position `k` where `perm[k] = i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
        let p = self.dim();
        Ok(LatentDataset {
            x: Arc::new(DMatrix::from_fn(p, n, |r, k| self.x[(r, perm[k])])),
            classes: perm.iter().map(|&i| self.classes[i]).collect(),
            omega: DMatrix::from_fn(p, n, |r, k| self.omega[(r, perm[k])]),
            psi: DVector::from_fn(n, |k, _| self.psi[perm[k]]),
        })
    }
}

#[derive(Clone, Debug)]
enum CovRoot {
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl CovRoot {
    fn new(name: &str, c: &DMatrix<f64>) -> Result<Self> {
        let p = c.nrows();
        let is_diagonal = (0..p).all(|j| (0..p).all(|i| i == j || c[(i, j)] == 0.0));
        if is_diagonal {
            let d = c.diagonal();
            check_eigenvalues(name, d.as_slice())?;
            return Ok(CovRoot::Diagonal(d.map(|v| v.max(0.0).sqrt())));
        }
        let eig = symmetric_eigen(c)?;
        check_eigenvalues(name, eig.eigenvalues.as_slice())?;
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let scaled = DMatrix::from_fn(p, p, |i, k| eig.eigenvectors[(i, k)] * sqrt_vals[k]);
        Ok(CovRoot::Dense(&scaled * eig.eigenvectors.transpose()))
    }

    fn apply(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            CovRoot::Diagonal(d) => {
                let mut out = z.clone();
                for (r, s) in d.iter().enumerate() {
                    out.row_mut(r).scale_mut(*s);
                }
                out
            }
            CovRoot::Dense(m) => m * z,
        }
    }
}

/// A mixture with its covariance square roots precomputed.
///
/// Roots come from a symmetric eigendecomposition with negative eigenvalues
/// clamped to zero, so rank-deficient covariances are allowed.
#[derive(Clone, Debug)]
pub struct MixtureSampler {
    model: MixtureModel,
    roots: [CovRoot; 2],
}

impl MixtureSampler {
    pub fn new(model: &MixtureModel) -> Result<Self> {
        Ok(MixtureSampler {
            roots: [CovRoot::new("C1", model.cov(Class::One))?, CovRoot::new("C2", model.cov(Class::Two))?],
            model: model.clone(),
        })
    }

    pub fn model(&self) -> &MixtureModel {
        &self.model
    }

    /// `n1` class-one columns followed by `n2` class-two columns; a pure
    /// function of `(model, n1, n2, seed)`.
    pub fn sample(&self, n1: usize, n2: usize, seed: u64) -> LatentDataset {
        let p = self.model.dim();
        let n = n1 + n2;
        let sqrt_p = (p as f64).sqrt();
        let mut rng = rng_from_seed(seed);
        let z = DMatrix::<f64>::from_iterator(p, n, (0..p * n).map(|_| StandardNormal.sample(&mut rng)));

        let mut omega = DMatrix::zeros(p, n);
        for (class, start, count) in [(Class::One, 0, n1), (Class::Two, n1, n2)] {
            if count == 0 {
                continue;
            }
            let block = self.roots[class.index()].apply(&z.columns(start, count).clone_owned()) / sqrt_p;
            omega.columns_mut(start, count).copy_from(&block);
        }

        let classes: Vec<Class> = (0..n).map(|i| if i < n1 { Class::One } else { Class::Two }).collect();
        let traces = [self.model.cov1.trace() / p as f64, self.model.cov2.trace() / p as f64];
        let x = DMatrix::from_fn(p, n, |r, i| self.model.mean(classes[i])[r] + sqrt_p * omega[(r, i)]);
        let psi = DVector::from_fn(n, |i, _| omega.column(i).norm_squared() - traces[classes[i].index()]);
        LatentDataset { x: Arc::new(x), classes, omega, psi }
    }
}

/// Convenience wrapper building a [`MixtureSampler`] for one draw.
pub fn sample(model: &MixtureModel, n1: usize, n2: usize, seed: u64) -> Result<LatentDataset> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidParameter("both classes need at least one sample".into()));
    }
    Ok(MixtureSampler::new(model)?.sample(n1, n2, seed))
}

/// Scale statistics of a mixture against the non-trivial growth regime.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    /// `||mu2 - mu1||`.
    pub mean_gap: f64,
    /// `tr(C2 - C1) / sqrt(n)`.
    pub trace_gap: f64,
    /// `tr((C2 - C1)^2) / p`.
    pub cov_gap: f64,
    pub norm_c1: f64,
    pub norm_c2: f64,
    pub tau: f64,
    pub ratio: f64,
    /// Separation large enough that error likely vanishes.
    pub likely_trivial: bool,
    /// Every separation statistic small: error likely stays at chance.
    pub likely_impossible: bool,
}

pub fn growth_diagnostics(model: &MixtureModel, n: usize) -> Result<GrowthReport> {
    let m = model.moments();
    let mean_gap = m.mean_gap_sq.sqrt();
    let trace_gap = m.tr_diff() / (n as f64).sqrt();
    let cov_gap = m.tr_diff_sq / m.p as f64;
    Ok(GrowthReport {
        mean_gap,
        trace_gap,
        cov_gap,
        norm_c1: spectral_norm(model.cov(Class::One))?,
        norm_c2: spectral_norm(model.cov(Class::Two))?,
        tau: model.tau(),
        ratio: m.p as f64 / n as f64,
        likely_trivial: mean_gap > 10.0 || trace_gap.abs() > 10.0,
        likely_impossible: mean_gap < 0.1 && trace_gap.abs() < 0.1 && cov_gap < 0.1,
    })
}
