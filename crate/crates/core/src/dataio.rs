//! MNIST IDX files, empirical class moments and additive white noise.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::seed::rng_from_seed;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let b = bytes
        .get(offset..offset + 4)
        .ok_or(Error::TruncatedFile { expected: offset + 4, found: bytes.len() })?;
    Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

/// Raw contents of an IDX image file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels, image after image.
    pub pixels: Vec<u8>,
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile { expected, found: bytes.len() });
    }
    Ok(IdxImages { count, rows, cols, pixels: bytes[16..expected].to_vec() })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile { expected, found: bytes.len() });
    }
    Ok(bytes[8..expected].to_vec())
}

pub fn write_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGES_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Signal power used to size white noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalPower {
    /// Mean over pixels of the per-pixel second moment.
    #[default]
    MeanSquare,
    /// Mean over pixels of the per-pixel variance across images.
    Variance,
}

impl std::str::FromStr for SignalPower {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_square" => Ok(SignalPower::MeanSquare),
            "variance" => Ok(SignalPower::Variance),
            other => Err(Error::Config(format!("unknown signal power {other:?}"))),
        }
    }
}

/// One preprocessing step applied to an [`ImageDataset`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum ScalingStep {
    /// Bytes divided by 255.
    Unit,
    /// `(x - mean) / std` with global mean and standard deviation.
    ZScore { mean: f64, std: f64 },
    /// Multiplied by `factor` so that pooled within-class `tr(C) / p = 1`.
    Trace { factor: f64 },
    WhiteNoise { snr_db: f64, noise_var: f64, power: SignalPower, seed: u64 },
}

/// Pixel preprocessing applied after loading.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    /// Pixels in `[0, 1]`.
    Unit,
    /// Global zero mean, unit variance.
    Zscore,
    /// Pooled within-class `tr(C) / p = 1` for the two digits.
    #[default]
    Trace,
}

impl std::str::FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(Scaling::Unit),
            "zscore" => Ok(Scaling::Zscore),
            "trace" => Ok(Scaling::Trace),
            other => Err(Error::Config(format!("unknown scaling {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ImageDataset {
    /// `p x N`, one vectorized image per column.
    pub images: DMatrix<f64>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
    pub scaling: Vec<ScalingStep>,
}

impl ImageDataset {
    pub fn from_idx(images: &IdxImages, labels: Vec<u8>) -> Result<Self> {
        if images.count != labels.len() {
            return Err(Error::CountMismatch { images: images.count, labels: labels.len() });
        }
        let p = images.rows * images.cols;
        let data = DMatrix::from_iterator(p, images.count, images.pixels.iter().map(|&b| b as f64 / 255.0));
        Ok(ImageDataset { images: data, labels, rows: images.rows, cols: images.cols, scaling: vec![ScalingStep::Unit] })
    }

    pub fn dim(&self) -> usize {
        self.images.nrows()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Columns with the given label, in file order.
    pub fn digit(&self, digit: u8) -> Result<DMatrix<f64>> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == digit).collect();
        if idx.is_empty() {
            return Err(Error::ClassMissing(digit));
        }
        Ok(self.images.select_columns(idx.iter()))
    }

    /// Only images of the two digits, in file order.
    pub fn select_digits(&self, a: u8, b: u8) -> Result<ImageDataset> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == a || self.labels[i] == b).collect();
        for d in [a, b] {
            if !idx.iter().any(|&i| self.labels[i] == d) {
                return Err(Error::ClassMissing(d));
            }
        }
        Ok(ImageDataset {
            images: self.images.select_columns(idx.iter()),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            rows: self.rows,
            cols: self.cols,
            scaling: self.scaling.clone(),
        })
    }

    fn scaled(&self, factor: f64, shift: f64, step: ScalingStep) -> ImageDataset {
        let mut out = self.clone();
        out.images.apply(|v| *v = (*v - shift) * factor);
        out.scaling.push(step);
        out
    }

    /// Global z-score over every pixel of every image.
    pub fn zscore(&self) -> Result<ImageDataset> {
        let count = self.images.len() as f64;
        let mean = self.images.sum() / count;
        let var = self.images.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        if var <= 0.0 {
            return Err(Error::DegenerateStats("constant images".into()));
        }
        let std = var.sqrt();
        Ok(self.scaled(1.0 / std, mean, ScalingStep::ZScore { mean, std }))
    }

    /// Rescale so the pooled within-class trace of digits `a`, `b`
    /// satisfies `(c_a tr C_a + c_b tr C_b) / p = 1`.
    pub fn trace_normalize(&self, a: u8, b: u8) -> Result<ImageDataset> {
        let p = self.dim() as f64;
        let mut pooled = 0.0;
        let mut total = 0usize;
        for d in [a, b] {
            let x = self.digit(d)?;
            if x.ncols() < 2 {
                return Err(Error::DegenerateStats(format!("digit {d} has a single image")));
            }
            let mean = x.column_mean();
            let ss: f64 = x.column_iter().map(|c| (c - &mean).norm_squared()).sum();
            pooled += x.ncols() as f64 * ss / (x.ncols() - 1) as f64;
            total += x.ncols();
        }
        let trace = pooled / total as f64 / p;
        if trace <= 0.0 {
            return Err(Error::DegenerateStats("zero within-class variance".into()));
        }
        let factor = 1.0 / trace.sqrt();
        Ok(self.scaled(factor, 0.0, ScalingStep::Trace { factor }))
    }

    pub fn apply_scaling(&self, scaling: Scaling, a: u8, b: u8) -> Result<ImageDataset> {
        match scaling {
            Scaling::Unit => Ok(self.clone()),
            Scaling::Zscore => self.zscore(),
            Scaling::Trace => self.trace_normalize(a, b),
        }
    }

    pub fn signal_power(&self, power: SignalPower) -> f64 {
        let (p, n) = self.images.shape();
        match power {
            SignalPower::MeanSquare => self.images.norm_squared() / (p * n) as f64,
            SignalPower::Variance => {
                let mean = self.images.column_mean();
                let ss: f64 = self.images.column_iter().map(|c| (c - &mean).norm_squared()).sum();
                ss / (p * n) as f64
            }
        }
    }
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<ImageDataset> {
    let images = parse_idx_images(&std::fs::read(images_path)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels_path)?)?;
    ImageDataset::from_idx(&images, labels)
}

/// Like [`load_idx`], converting only images whose label is in `digits`.
pub fn load_idx_digits(images_path: &Path, labels_path: &Path, digits: &[u8]) -> Result<ImageDataset> {
    let images = parse_idx_images(&std::fs::read(images_path)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels_path)?)?;
    if images.count != labels.len() {
        return Err(Error::CountMismatch { images: images.count, labels: labels.len() });
    }
    for &d in digits {
        if !labels.contains(&d) {
            return Err(Error::ClassMissing(d));
        }
    }
    let p = images.rows * images.cols;
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| digits.contains(&labels[i])).collect();
    let data = DMatrix::from_fn(p, keep.len(), |r, c| images.pixels[keep[c] * p + r] as f64 / 255.0);
    Ok(ImageDataset {
        images: data,
        labels: keep.iter().map(|&i| labels[i]).collect(),
        rows: images.rows,
        cols: images.cols,
        scaling: vec![ScalingStep::Unit],
    })
}

pub const MNIST_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";

/// The MNIST training set from the standard file names under `dir`.
pub fn load_mnist_train(dir: &Path) -> Result<ImageDataset> {
    load_idx(&dir.join(MNIST_TRAIN_IMAGES), &dir.join(MNIST_TRAIN_LABELS))
}

/// MNIST training images of the given digits only.
pub fn load_mnist_train_digits(dir: &Path, digits: &[u8]) -> Result<ImageDataset> {
    load_idx_digits(&dir.join(MNIST_TRAIN_IMAGES), &dir.join(MNIST_TRAIN_LABELS), digits)
}

/// Empirical two-class model: per-digit sample means, covariances with
/// denominator `N_a - 1`, and `c1` from the class counts. `digit_a` is
/// class one.
pub fn class_stats(data: &ImageDataset, digit_a: u8, digit_b: u8) -> Result<MixtureModel> {
    let mut means = Vec::with_capacity(2);
    let mut covs = Vec::with_capacity(2);
    let mut counts = Vec::with_capacity(2);
    for d in [digit_a, digit_b] {
        let x = data.digit(d)?;
        let (mean, cov) = sample_moments(&x)?;
        means.push(mean);
        covs.push(cov);
        counts.push(x.ncols());
    }
    let c1 = counts[0] as f64 / (counts[0] + counts[1]) as f64;
    let cov2 = covs.pop().expect("two covariances");
    let cov1 = covs.pop().expect("two covariances");
    let mu2 = means.pop().expect("two means");
    let mu1 = means.pop().expect("two means");
    MixtureModel::new(mu1, mu2, cov1, cov2, c1)
}

/// Column mean and unbiased covariance, exactly symmetric.
pub fn sample_moments(x: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::DegenerateStats(format!("need two samples for a covariance, got {n}")));
    }
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut c in centered.column_iter_mut() {
        c -= &mean;
    }
    let mut cov = &centered * centered.transpose() / (n - 1) as f64;
    let p = cov.nrows();
    for j in 0..p {
        for i in 0..j {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((mean, cov))
}

/// `(||mu2 - mu1||^2, (tr(C2 - C1))^2 / p, tr((C2 - C1)^2) / p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    pub mean_gap_sq: f64,
    pub trace_gap_sq: f64,
    pub cov_gap_sq: f64,
}

pub fn discrepancy_stats(model: &MixtureModel) -> Discrepancy {
    let m = model.moments();
    let p = m.p as f64;
    Discrepancy { mean_gap_sq: m.mean_gap_sq, trace_gap_sq: m.tr_diff() * m.tr_diff() / p, cov_gap_sq: m.tr_diff_sq / p }
}

/// Adds i.i.d. `N(0, P / 10^(snr_db/10))` noise to every pixel, with `P`
/// the dataset's signal power. `snr_db = +inf` returns the data unchanged.
pub fn add_white_noise(data: &ImageDataset, snr_db: f64, seed: u64, power: SignalPower) -> Result<ImageDataset> {
    if snr_db.is_nan() {
        return Err(Error::InvalidParameter("snr_db is NaN".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(data.clone());
    }
    let noise_var = data.signal_power(power) / 10f64.powf(snr_db / 10.0);
    let sd = noise_var.sqrt();
    let mut rng = rng_from_seed(seed);
    let mut out = data.clone();
    for v in out.images.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += sd * z;
    }
    out.scaling.push(ScalingStep::WhiteNoise { snr_db, noise_var, power, seed });
    Ok(out)
}
