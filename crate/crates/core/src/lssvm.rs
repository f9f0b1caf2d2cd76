//! Exact LS-SVM training and the decision function.
//!
//! With `S = K + (n / gamma) I`, the dual solution is
//!
//! ```text
//! b     = 1' S^-1 y / 1' S^-1 1
//! alpha = S^-1 (y - b 1)
//! ```
//!
//! and a point is scored by `g(x) = alpha' k(x) + b`. Both `S^-1 y` and
//! `S^-1 1` come from one factorization of `S`.

use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, KernelProfile};

/// Relative pivot size below which a factorization is rejected.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    /// Labeled `-1`; scored below the threshold.
    One,
    /// Labeled `+1`; scored at or above the threshold.
    Two,
}

impl Class {
    pub fn label(self) -> f64 {
        match self {
            Class::One => -1.0,
            Class::Two => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Class::One => 0,
            Class::Two => 1,
        }
    }

    pub fn from_label(y: f64) -> Self {
        if y < 0.0 {
            Class::One
        } else {
            Class::Two
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelConvention {
    /// `y_i` in `{-1, +1}`.
    #[default]
    Standard,
    /// `y_i` in `{-1/c1, +1/c2}` (Fisher targets), so that `1'y = 0`.
    Fisher,
}

pub fn class_counts(classes: &[Class]) -> (usize, usize) {
    let n2 = classes.iter().filter(|&&c| c == Class::Two).count();
    (classes.len() - n2, n2)
}

pub fn standard_labels(classes: &[Class]) -> Vec<f64> {
    classes.iter().map(|c| c.label()).collect()
}

/// Fisher targets `-n/n1` for class one and `n/n2` for class two.
pub fn normalize_labels(classes: &[Class]) -> Result<Vec<f64>> {
    let (n1, n2) = class_counts(classes);
    if n1 == 0 || n2 == 0 {
        return Err(Error::OneClassOnly);
    }
    let n = classes.len() as f64;
    let (y1, y2) = (-n / n1 as f64, n / n2 as f64);
    Ok(classes
        .iter()
        .map(|c| match c {
            Class::One => y1,
            Class::Two => y2,
        })
        .collect())
}

pub fn labels_for(classes: &[Class], convention: LabelConvention) -> Result<Vec<f64>> {
    match convention {
        LabelConvention::Standard => {
            let (n1, n2) = class_counts(classes);
            if n1 == 0 || n2 == 0 {
                return Err(Error::OneClassOnly);
            }
            Ok(standard_labels(classes))
        }
        LabelConvention::Fisher => normalize_labels(classes),
    }
}

/// Class one strictly below `threshold`, class two otherwise.
pub fn classify(score: f64, threshold: f64) -> Class {
    if score < threshold {
        Class::One
    } else {
        Class::Two
    }
}

/// Dual coefficients and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub alpha: DVector<f64>,
    pub bias: f64,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn min_abs_diagonal(m: &DMatrix<f64>) -> f64 {
    m.diagonal().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
}

/// Solves `S X = B` for a symmetric, possibly indefinite `S`.
///
/// Partial pivoting first; full pivoting when a pivot falls below
/// `1e-12 ||S||`.
fn solve_symmetric(s: DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let tolerance = PIVOT_TOLERANCE * inf_norm(&s);
    let lu = s.clone().lu();
    if min_abs_diagonal(&lu.u()) > tolerance {
        if let Some(x) = lu.solve(rhs) {
            return Ok(x);
        }
    }
    let full = s.full_piv_lu();
    let pivot = min_abs_diagonal(&full.u());
    if !(pivot > tolerance) {
        return Err(Error::SingularSystem { pivot, tolerance });
    }
    full.solve(rhs).ok_or(Error::SingularSystem { pivot, tolerance })
}

/// Trains on a precomputed Gram matrix.
pub fn train(gram: &DMatrix<f64>, labels: &[f64], gamma: f64) -> Result<Solution> {
    let n = gram.nrows();
    if gram.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: gram.ncols() });
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(Error::OneClassOnly);
    }

    let mut s = gram.clone();
    let ridge = n as f64 / gamma;
    for i in 0..n {
        s[(i, i)] += ridge;
    }
    let mut rhs = DMatrix::from_element(n, 2, 1.0);
    rhs.set_column(0, &DVector::from_column_slice(labels));
    let x = solve_symmetric(s, &rhs)?;

    let (s_inv_y, s_inv_one) = (x.column(0), x.column(1));
    let bias = s_inv_y.sum() / s_inv_one.sum();
    let alpha = s_inv_y - s_inv_one * bias;
    Ok(Solution { alpha, bias })
}

/// A trained classifier; immutable and shareable across threads.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    profile: KernelProfile,
    gamma: f64,
    convention: LabelConvention,
    data: Arc<DMatrix<f64>>,
    alpha: DVector<f64>,
    bias: f64,
}

impl TrainedModel {
    /// Trains on the columns of `data` (p x n) with the given classes.
    pub fn fit(
        data: Arc<DMatrix<f64>>,
        classes: &[Class],
        profile: KernelProfile,
        gamma: f64,
        convention: LabelConvention,
    ) -> Result<Self> {
        if classes.len() != data.ncols() {
            return Err(Error::DimensionMismatch { expected: data.ncols(), got: classes.len() });
        }
        let labels = labels_for(classes, convention)?;
        let gram = kernel::gram_matrix(&data, &profile);
        let Solution { alpha, bias } = train(&gram, &labels, gamma)?;
        Ok(TrainedModel { profile, gamma, convention, data, alpha, bias })
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn convention(&self) -> LabelConvention {
        self.convention
    }

    pub fn profile(&self) -> &KernelProfile {
        &self.profile
    }

    pub fn training_data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// `g(x) = alpha' k(x) + b`.
    pub fn decide(&self, x: &[f64]) -> Result<f64> {
        let k = kernel::kernel_vector(&self.data, x, &self.profile)?;
        Ok(self.alpha.iter().zip(k.iter()).map(|(a, k)| a * k).sum::<f64>() + self.bias)
    }

    /// Scores for every column of `points`.
    pub fn decide_batch(&self, points: &DMatrix<f64>) -> Result<DVector<f64>> {
        let k = kernel::cross_kernel(&self.data, points, &self.profile)?;
        Ok((k * &self.alpha).add_scalar(self.bias))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SerializedModel::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SerializedModel = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.try_into()
    }
}

/// On-disk form. The training matrix is column-major little-endian
/// float64, base64 encoded; floats round-trip exactly.
#[derive(Serialize, Deserialize)]
struct SerializedModel {
    p: usize,
    n: usize,
    gamma: f64,
    label_convention: LabelConvention,
    kernel: KernelProfile,
    alpha: Vec<f64>,
    bias: f64,
    training_data: String,
}

impl From<&TrainedModel> for SerializedModel {
    fn from(m: &TrainedModel) -> Self {
        let bytes: Vec<u8> = m.data.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
        SerializedModel {
            p: m.data.nrows(),
            n: m.data.ncols(),
            gamma: m.gamma,
            label_convention: m.convention,
            kernel: m.profile.clone(),
            alpha: m.alpha.iter().copied().collect(),
            bias: m.bias,
            training_data: BASE64.encode(bytes),
        }
    }
}

impl TryFrom<SerializedModel> for TrainedModel {
    type Error = Error;

    fn try_from(raw: SerializedModel) -> Result<Self> {
        let bytes = BASE64
            .decode(raw.training_data.as_bytes())
            .map_err(|e| Error::Config(format!("training_data: {e}")))?;
        let expected = raw.p * raw.n * 8;
        if bytes.len() != expected {
            return Err(Error::TruncatedFile { expected, found: bytes.len() });
        }
        if raw.alpha.len() != raw.n {
            return Err(Error::DimensionMismatch { expected: raw.n, got: raw.alpha.len() });
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(TrainedModel {
            profile: raw.kernel,
            gamma: raw.gamma,
            convention: raw.label_convention,
            data: Arc::new(DMatrix::from_vec(raw.p, raw.n, values)),
            alpha: DVector::from_vec(raw.alpha),
            bias: raw.bias,
        })
    }
}
