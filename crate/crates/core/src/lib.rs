//! No-reference image denoising quality assessment.
//!
//! Given a noisy image and a candidate denoising of it, [`extract_features`]
//! computes a 19-dimensional quality descriptor; a random-forest
//! [`QualityModel`] maps that descriptor to a predicted PSNR or SSIM, which
//! can rank competing results ([`rank_results`]) or drive a gradient-ascent
//! search over a denoiser's strength parameter ([`tuner::tune`]).
//!
//! Pixel math is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common choices.

pub mod denoise;
pub mod error;
pub mod features;
pub mod forest;
pub mod harness;
pub mod image;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod rng;
pub mod scalar;
pub mod svd;
pub mod tuner;

pub use denoise::{denoise, DenoiserId, Method};
pub use error::{Error, Result};
pub use features::{extract_features, Family, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
pub use forest::{rank_results, ForestConfig, LabeledSample, QualityModel, Target};
pub use image::{GradientField, Image, PatchMatrix};
pub use metrics::{kendall_tau, psnr, rmse_rse, ssim};
pub use noise::{NoiseKind, NoiseSpec};
pub use scalar::Scalar;

pub type ImageF32 = Image<f32>;
pub type ImageF64 = Image<f64>;
pub type GradientFieldF64 = GradientField<f64>;
pub type PatchMatrixF64 = PatchMatrix<f64>;
