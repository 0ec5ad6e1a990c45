//! Pairwise and group image-quality metrics.

mod fid;
mod pcqi;
mod ssim;

pub use fid::{
    embed, fid, fid_from_embeddings, fit_gaussian, frechet_distance, sqrtm_spd, GaussianFit,
    COVARIANCE_EPSILON,
};
pub use pcqi::{pcqi, pcqi_terms, PatchTerms, PcqiParams};
pub use ssim::{gaussian_kernel, ssim, ssim_map, SsimParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("image {size:?} smaller than window {window}")]
    ImageTooSmall { size: (usize, usize), window: usize },
    #[error("grid {grid} too fine for image {size:?}: cells must be at least 4x4 px")]
    GridTooFine { grid: usize, size: (usize, usize) },
    #[error("group too small: need {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("matrix is not symmetric (max deviation {0:e})")]
    Asymmetric(f64),
    #[error("significantly negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Pairwise scores of one translated image against its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub ssim: f64,
    pub pcqi: f64,
}

/// SSIM and PCQI of `test` against `reference`.
pub fn quality_scores(
    reference: &crate::imaging::GrayImage,
    test: &crate::imaging::GrayImage,
    ssim_params: &SsimParams,
    pcqi_params: &PcqiParams,
) -> Result<QualityScores, QualityError> {
    Ok(QualityScores {
        ssim: ssim(reference, test, ssim_params)?,
        pcqi: pcqi(reference, test, pcqi_params)?,
    })
}
