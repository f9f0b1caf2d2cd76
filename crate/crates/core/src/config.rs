//! TOML experiment configuration.
//!
//! ```toml
//! [model]
//! p = 512
//! c1 = 0.5
//! mu1 = "unit_spike(0, 2)"     # "zeros", "unit_spike(i, v)" or a list
//! mu2 = "unit_spike(1, 2)"
//! cov1 = "identity"            # "toeplitz(rho, scale)", "toeplitz_sqrtp(rho, a)"
//! cov2 = "toeplitz_sqrtp(0.4, 4)"  # or { file = "c2.txt" }
//!
//! [kernel]
//! kind = "gaussian"
//! sigma2 = 1.0
//!
//! [experiment]
//! c0 = 2.0      # or n = 256
//! gamma = 1.0
//!
//! [sweep]
//! axis = "sigma2"
//! values = [0.25, 0.5, 4.0]
//! ```
//!
//! Model specs are written independently of `p`, so one config describes a
//! whole family of models (used by the convergence study).

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelProfile;
use crate::lssvm::LabelConvention;
use crate::mixture::{toeplitz_cov, unit_spike, MixtureModel};
use crate::theory::ThresholdRule;

/// Splits `name(a, b, ...)` into the name and numeric arguments.
fn parse_call(text: &str) -> Result<(String, Vec<f64>)> {
    let text = text.trim();
    let Some(open) = text.find('(') else {
        return Ok((text.to_string(), Vec::new()));
    };
    let inner = text[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| Error::Config(format!("missing ')' in {text:?}")))?;
    let args = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("bad number {s:?} in {text:?}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((text[..open].trim().to_string(), args))
}

fn expect_args(name: &str, args: &[f64], count: usize) -> Result<()> {
    if args.len() != count {
        return Err(Error::Config(format!("{name} takes {count} arguments, got {}", args.len())));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Named(String),
    Dense(Vec<f64>),
}

impl VectorSpec {
    pub fn build(&self, p: usize) -> Result<DVector<f64>> {
        match self {
            VectorSpec::Dense(v) => {
                if v.len() != p {
                    return Err(Error::Config(format!("mean has {} entries, expected {p}", v.len())));
                }
                Ok(DVector::from_column_slice(v))
            }
            VectorSpec::Named(text) => {
                let (name, args) = parse_call(text)?;
                match name.as_str() {
                    "zeros" => Ok(DVector::zeros(p)),
                    "unit_spike" => {
                        expect_args(&name, &args, 2)?;
                        let index = args[0];
                        if index < 0.0 || index.fract() != 0.0 || index as usize >= p {
                            return Err(Error::Config(format!("spike index {index} outside 0..{p}")));
                        }
                        Ok(unit_spike(p, index as usize, args[1]))
                    }
                    _ => Err(Error::Config(format!("unknown mean spec {text:?}"))),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovSpec {
    Named(String),
    File { file: PathBuf },
}

/// Reads a whitespace-separated square matrix, one row per line.
pub fn read_dense_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("{}: bad number {s:?}", path.display()))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("{}: matrix is not square", path.display())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl CovSpec {
    /// `base` resolves relative file paths.
    pub fn build(&self, p: usize, base: &Path) -> Result<DMatrix<f64>> {
        match self {
            CovSpec::File { file } => {
                let m = read_dense_matrix(&base.join(file))?;
                if m.nrows() != p {
                    return Err(Error::Config(format!("{}: size {} but p = {p}", file.display(), m.nrows())));
                }
                Ok(m)
            }
            CovSpec::Named(text) => {
                let (name, args) = parse_call(text)?;
                match name.as_str() {
                    "identity" => Ok(DMatrix::identity(p, p)),
                    "zeros" => Ok(DMatrix::zeros(p, p)),
                    "scaled_identity" => {
                        expect_args(&name, &args, 1)?;
                        Ok(DMatrix::identity(p, p) * args[0])
                    }
                    "toeplitz" => {
                        expect_args(&name, &args, 2)?;
                        Ok(toeplitz_cov(args[0], args[1], p))
                    }
                    // scale = 1 + a / sqrt(p)
                    "toeplitz_sqrtp" => {
                        expect_args(&name, &args, 2)?;
                        Ok(toeplitz_cov(args[0], 1.0 + args[1] / (p as f64).sqrt(), p))
                    }
                    _ => Err(Error::Config(format!("unknown covariance spec {text:?}"))),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub p: usize,
    #[serde(default = "half")]
    pub c1: f64,
    pub mu1: VectorSpec,
    pub mu2: VectorSpec,
    pub cov1: CovSpec,
    pub cov2: CovSpec,
}

fn half() -> f64 {
    0.5
}

impl ModelSpec {
    pub fn build(&self, base: &Path) -> Result<MixtureModel> {
        self.build_at(self.p, base)
    }

    /// The same family instantiated at dimension `p`.
    pub fn build_at(&self, p: usize, base: &Path) -> Result<MixtureModel> {
        MixtureModel::new(
            self.mu1.build(p)?,
            self.mu2.build(p)?,
            self.cov1.build(p, base)?,
            self.cov2.build(p, base)?,
            self.c1,
        )
    }
}

/// Kernel as written in a config; a local kernel may leave `tau` out to be
/// anchored at the model's `tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Gaussian { sigma2: f64 },
    Polynomial { coeffs: Vec<f64> },
    Local { tau: Option<f64>, f: f64, fp: f64, fpp: f64 },
}

impl KernelSpec {
    pub fn resolve(&self, model_tau: f64) -> Result<KernelProfile> {
        match self {
            KernelSpec::Gaussian { sigma2 } => KernelProfile::gaussian(*sigma2),
            KernelSpec::Polynomial { coeffs } => KernelProfile::polynomial(coeffs.clone()),
            KernelSpec::Local { tau, f, fp, fpp } => KernelProfile::local(tau.unwrap_or(model_tau), *f, *fp, *fpp),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSettings {
    /// Training size; exclusive with `c0`.
    pub n: Option<usize>,
    /// `p / n`; sets `n = round(p / c0)`.
    pub c0: Option<f64>,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "one")]
    pub gamma: f64,
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threshold: ThresholdRule,
    #[serde(default)]
    pub convention: LabelConvention,
}

fn default_n_test() -> usize {
    512
}

fn one() -> f64 {
    1.0
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            n: None,
            c0: None,
            n_test: default_n_test(),
            gamma: 1.0,
            trials: None,
            seed: 0,
            threshold: ThresholdRule::default(),
            convention: LabelConvention::default(),
        }
    }
}

/// `n = round(p / c0)`, at least 4.
pub fn n_from_c0(p: usize, c0: f64) -> Result<usize> {
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(Error::Config(format!("c0 must be > 0, got {c0}")));
    }
    Ok(((p as f64 / c0).round() as usize).max(4))
}

impl ExperimentSettings {
    pub fn training_size(&self, p: usize) -> Result<usize> {
        match (self.n, self.c0) {
            (Some(_), Some(_)) => Err(Error::Config("set either n or c0, not both".into())),
            (Some(n), None) if n >= 2 => Ok(n),
            (Some(n), None) => Err(Error::Config(format!("n must be >= 2, got {n}"))),
            (None, Some(c0)) => n_from_c0(p, c0),
            (None, None) => Err(Error::Config("experiment needs n or c0".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// `f'(tau)` of a local kernel.
    Fp,
    /// `f''(tau)` of a local kernel.
    Fpp,
    /// Bandwidth of a gaussian kernel.
    Sigma2,
    /// `p / n` at fixed `p`.
    C0,
    /// Class-one proportion.
    C1,
    /// Spike value of both class means.
    MuOffset,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Fp => "fp",
            SweepAxis::Fpp => "fpp",
            SweepAxis::Sigma2 => "sigma2",
            SweepAxis::C0 => "c0",
            SweepAxis::C1 => "c1",
            SweepAxis::MuOffset => "mu_offset",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    /// `(n, p)` pairs.
    pub sizes: Vec<(usize, usize)>,
    #[serde(default = "default_test_points")]
    pub test_points: usize,
}

fn default_test_points() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub experiment: ExperimentSettings,
    pub sweep: Option<SweepSpec>,
    pub convergence: Option<ConvergenceSpec>,
    /// Directory against which relative paths resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn build_model(&self) -> Result<MixtureModel> {
        self.model.build(&self.base_dir)
    }
}
