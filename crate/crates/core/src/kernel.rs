//! Translation-invariant kernels evaluated on normalized squared distances.
//!
//! Every kernel here is a scalar profile `f` applied to `||x - y||^2 / p`.
//! The asymptotic theory only sees `f`, `f'` and `f''` at one point, so a
//! profile can also be specified locally by those three numbers (see
//! [`KernelProfile::LocalTaylor`]).
//!
//! `Polynomial` is a polynomial in the normalized squared distance, not the
//! inner-product polynomial kernel `(x.y + c)^d`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns per tile in the Gram computation.
const GRAM_BLOCK: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileSpec", into = "ProfileSpec")]
pub enum KernelProfile {
    /// `f(u) = exp(-u / (2 sigma2))`.
    Gaussian { sigma2: f64 },
    /// `f(u) = sum_i coeffs[i] u^i`.
    Polynomial { coeffs: Vec<f64> },
    /// `f(u) = f + fp (u - tau) + fpp (u - tau)^2 / 2`.
    ///
    /// May go negative away from `tau`; the resulting Gram matrix need not
    /// be positive semi-definite.
    LocalTaylor { tau: f64, f: f64, fp: f64, fpp: f64 },
}

/// Value and first two derivatives of a profile at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDerivatives {
    pub f: f64,
    pub fp: f64,
    pub fpp: f64,
}

/// Config-file form: `{"kind":"gaussian","sigma2":1.0}`,
/// `{"kind":"polynomial","coeffs":[a0,...]}`,
/// `{"kind":"local","tau":2.0,"f":4.0,"fp":0.0,"fpp":2.0}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ProfileSpec {
    Gaussian { sigma2: f64 },
    Polynomial { coeffs: Vec<f64> },
    Local { tau: f64, f: f64, fp: f64, fpp: f64 },
}

impl TryFrom<ProfileSpec> for KernelProfile {
    type Error = Error;

    fn try_from(spec: ProfileSpec) -> Result<Self> {
        match spec {
            ProfileSpec::Gaussian { sigma2 } => KernelProfile::gaussian(sigma2),
            ProfileSpec::Polynomial { coeffs } => KernelProfile::polynomial(coeffs),
            ProfileSpec::Local { tau, f, fp, fpp } => KernelProfile::local(tau, f, fp, fpp),
        }
    }
}

impl From<KernelProfile> for ProfileSpec {
    fn from(profile: KernelProfile) -> Self {
        match profile {
            KernelProfile::Gaussian { sigma2 } => ProfileSpec::Gaussian { sigma2 },
            KernelProfile::Polynomial { coeffs } => ProfileSpec::Polynomial { coeffs },
            KernelProfile::LocalTaylor { tau, f, fp, fpp } => ProfileSpec::Local { tau, f, fp, fpp },
        }
    }
}

impl KernelProfile {
    pub fn gaussian(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian kernel needs sigma2 > 0, got {sigma2}"
            )));
        }
        Ok(KernelProfile::Gaussian { sigma2 })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "polynomial kernel needs at least one finite coefficient".into(),
            ));
        }
        Ok(KernelProfile::Polynomial { coeffs })
    }

    /// Second-order profile with prescribed `f`, `f'`, `f''` at `tau`.
    pub fn local(tau: f64, f: f64, fp: f64, fpp: f64) -> Result<Self> {
        if ![tau, f, fp, fpp].iter().all(|v| v.is_finite()) || tau < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "local kernel needs finite values and tau >= 0, got tau={tau} f={f} fp={fp} fpp={fpp}"
            )));
        }
        Ok(KernelProfile::LocalTaylor { tau, f, fp, fpp })
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            KernelProfile::Gaussian { sigma2 } => (-u / (2.0 * sigma2)).exp(),
            KernelProfile::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &a| acc * u + a),
            KernelProfile::LocalTaylor { tau, f, fp, fpp } => {
                let d = u - tau;
                f + fp * d + 0.5 * fpp * d * d
            }
        }
    }

    /// Exact `(f, f', f'')` at `tau`, from the closed form of each kind.
    pub fn derivatives(&self, tau: f64) -> LocalDerivatives {
        match self {
            KernelProfile::Gaussian { sigma2 } => {
                let f = (-tau / (2.0 * sigma2)).exp();
                LocalDerivatives {
                    f,
                    fp: -f / (2.0 * sigma2),
                    fpp: f / (4.0 * sigma2 * sigma2),
                }
            }
            KernelProfile::Polynomial { coeffs } => {
                // Horner on value, first and second derivative together.
                let (mut f, mut fp, mut fpp) = (0.0, 0.0, 0.0);
                for &a in coeffs.iter().rev() {
                    fpp = fpp * tau + 2.0 * fp;
                    fp = fp * tau + f;
                    f = f * tau + a;
                }
                LocalDerivatives { f, fp, fpp }
            }
            KernelProfile::LocalTaylor { tau: anchor, f, fp, fpp } => {
                let d = tau - anchor;
                LocalDerivatives {
                    f: f + fp * d + 0.5 * fpp * d * d,
                    fp: fp + fpp * d,
                    fpp: *fpp,
                }
            }
        }
    }
}

/// Fixed-order dot product. Four interleaved partial sums let the compiler
/// vectorize while keeping the result independent of the caller.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for k in 0..4 {
            acc[k] += ca[k] * cb[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn column(data: &DMatrix<f64>, j: usize) -> &[f64] {
    let p = data.nrows();
    &data.as_slice()[j * p..(j + 1) * p]
}

/// `||a - b||^2 / p` via the norm expansion, clamped at zero.
#[inline]
fn normalized_sq_distance(norm_a: f64, norm_b: f64, inner: f64, p: f64) -> f64 {
    ((norm_a + norm_b - 2.0 * inner) / p).max(0.0)
}

fn column_sq_norms(data: &DMatrix<f64>) -> Vec<f64> {
    (0..data.ncols())
        .map(|j| {
            let c = column(data, j);
            dot(c, c)
        })
        .collect()
}

/// Matrix of `||x_i - x_j||^2 / p` over the columns of `data` (p x n).
///
/// Exactly symmetric with a zero diagonal.
pub fn sq_distance_matrix(data: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, n) = data.shape();
    let norms = column_sq_norms(data);
    let pf = p as f64;

    // Upper triangle by column tiles; each entry is one `dot` call so the
    // result does not depend on how tiles are scheduled.
    let tiles: Vec<(usize, Vec<(usize, usize, f64)>)> = (0..n.div_ceil(GRAM_BLOCK))
        .into_par_iter()
        .map(|jb| {
            let j0 = jb * GRAM_BLOCK;
            let j1 = (j0 + GRAM_BLOCK).min(n);
            let mut out = Vec::with_capacity((j1 - j0) * j1);
            for ib in 0..=jb {
                let i0 = ib * GRAM_BLOCK;
                let i1 = (i0 + GRAM_BLOCK).min(n);
                for j in j0..j1 {
                    let cj = column(data, j);
                    for i in i0..i1.min(j) {
                        let d = normalized_sq_distance(norms[i], norms[j], dot(column(data, i), cj), pf);
                        out.push((i, j, d));
                    }
                }
            }
            (jb, out)
        })
        .collect();

    let mut dist = DMatrix::zeros(n, n);
    for (_, entries) in tiles {
        for (i, j, d) in entries {
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    dist
}

/// Kernel matrix `K_ij = f(||x_i - x_j||^2 / p)` for the columns of `data`.
pub fn gram_matrix(data: &DMatrix<f64>, profile: &KernelProfile) -> DMatrix<f64> {
    let mut k = sq_distance_matrix(data);
    k.apply(|d| *d = profile.eval(*d));
    k
}

/// `k(x)_j = f(||x - x_j||^2 / p)`.
pub fn kernel_vector(data: &DMatrix<f64>, x: &[f64], profile: &KernelProfile) -> Result<DVector<f64>> {
    let (p, n) = data.shape();
    if x.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: x.len() });
    }
    let norm_x = dot(x, x);
    let pf = p as f64;
    Ok(DVector::from_iterator(
        n,
        (0..n).map(|j| {
            let c = column(data, j);
            profile.eval(normalized_sq_distance(norm_x, dot(c, c), dot(x, c), pf))
        }),
    ))
}

/// Kernel vectors for every column of `points`, as the rows of an `m x n`
/// matrix (`m` test points against `n` training columns).
pub fn cross_kernel(data: &DMatrix<f64>, points: &DMatrix<f64>, profile: &KernelProfile) -> Result<DMatrix<f64>> {
    let (p, n) = data.shape();
    if points.nrows() != p {
        return Err(Error::DimensionMismatch { expected: p, got: points.nrows() });
    }
    let m = points.ncols();
    let train_norms = column_sq_norms(data);
    let pf = p as f64;
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|t| {
            let x = column(points, t);
            let norm_x = dot(x, x);
            (0..n)
                .map(|j| profile.eval(normalized_sq_distance(norm_x, train_norms[j], dot(x, column(data, j)), pf)))
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(m, n, |t, j| rows[t][j]))
}
