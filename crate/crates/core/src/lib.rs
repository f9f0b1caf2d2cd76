//! Least-squares SVM classification in the large-dimensional regime.
//!
//! The crate trains LS-SVM classifiers exactly (one dense linear solve) and
//! predicts their behavior when both the sample size `n` and the dimension
//! `p` are large: for two-class Gaussian mixtures the decision score of a new
//! point is asymptotically Gaussian, with mean and variance that depend only
//! on the class statistics and on the kernel's value and first two
//! derivatives at a single point `tau`.
//!
//! Modules:
//!
//! - [`kernel`]: kernel profiles `f(||x - y||^2 / p)`, Gram matrices.
//! - [`lssvm`]: training, decision function, label normalization.
//! - [`mixture`]: two-class Gaussian mixtures, sampling with latents.
//! - [`theory`]: random equivalent, Gaussian statistics, error rates.
//! - [`experiments`]: Monte Carlo harness comparing practice to theory.
//! - [`dataio`]: MNIST IDX files, empirical moments, white noise.

pub mod config;
pub mod dataio;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod ks;
pub mod lssvm;
pub mod mixture;
pub mod seed;
pub mod theory;

pub use error::{Error, Result};
pub use kernel::{KernelProfile, LocalDerivatives};
pub use lssvm::{Class, LabelConvention, TrainedModel};
pub use mixture::{LatentDataset, MixtureModel, MixtureSampler};
pub use theory::{ErrorRates, TheoryStats};
