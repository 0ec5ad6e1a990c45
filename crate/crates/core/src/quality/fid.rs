//! Fréchet distance between Gaussian fits of image embeddings.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::QualityError;
use crate::imaging::GrayImage;

/// Ridge added to every fitted covariance.
pub const COVARIANCE_EPSILON: f64 = 1e-6;
const SYMMETRY_TOLERANCE: f64 = 1e-9;
const NEGATIVE_EIGEN_TOLERANCE: f64 = 1e-6;
const MIN_CELL_PX: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianFit {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, QualityError> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(QualityError::InconsistentDimensions(format!(
                "mean has {d} dims, covariance is {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        check_symmetric(&covariance, 1e-12)?;
        let eig = SymmetricEigen::new(covariance.clone());
        if let Some(&min) = eig.eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
            if min < -1e-9 {
                return Err(QualityError::NegativeEigenvalue(min));
            }
        }
        Ok(Self { mean, covariance })
    }

    /// Diagonal covariance from per-dimension variances.
    pub fn diagonal(mean: &[f64], variances: &[f64]) -> Result<Self, QualityError> {
        if mean.len() != variances.len() {
            return Err(QualityError::InconsistentDimensions(
                "mean and variance lengths differ".to_string(),
            ));
        }
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
        )
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<(), QualityError> {
    if m.nrows() != m.ncols() {
        return Err(QualityError::InconsistentDimensions(format!(
            "matrix is {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.norm().max(1.0);
    let asym = (m - m.transpose()).abs().max();
    if asym > tol * scale {
        return Err(QualityError::Asymmetric(asym));
    }
    Ok(())
}

/// Grid-statistics embedding: cell means followed by cell standard
/// deviations (population), `2·grid²` values in row-major cell order.
pub fn embed(img: &GrayImage, grid: usize) -> Result<Vec<f64>, QualityError> {
    let (w, h) = (img.width(), img.height());
    if grid == 0 || w / grid < MIN_CELL_PX || h / grid < MIN_CELL_PX {
        return Err(QualityError::GridTooFine { grid, size: (w, h) });
    }
    let mut means = Vec::with_capacity(grid * grid);
    let mut stds = Vec::with_capacity(grid * grid);
    for gy in 0..grid {
        let (y0, y1) = (gy * h / grid, (gy + 1) * h / grid);
        for gx in 0..grid {
            let (x0, x1) = (gx * w / grid, (gx + 1) * w / grid);
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += img.get(x, y);
                }
            }
            let mean = sum / n;
            let mut ss = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = img.get(x, y) - mean;
                    ss += d * d;
                }
            }
            means.push(mean);
            stds.push((ss / n).sqrt());
        }
    }
    means.extend(stds);
    Ok(means)
}

/// Sample mean and unbiased covariance, plus `1e-6·I`.
pub fn fit_gaussian(vectors: &[Vec<f64>]) -> Result<GaussianFit, QualityError> {
    if vectors.len() < 2 {
        return Err(QualityError::TooFewSamples {
            needed: 2,
            got: vectors.len(),
        });
    }
    let d = vectors[0].len();
    if d == 0 {
        return Err(QualityError::InconsistentDimensions(
            "empty feature vectors".to_string(),
        ));
    }
    if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
        return Err(QualityError::InconsistentDimensions(format!(
            "expected {d} features, found {}",
            bad.len()
        )));
    }
    let n = vectors.len() as f64;
    let mut mean = DVector::zeros(d);
    for v in vectors {
        mean += DVector::from_column_slice(v);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for v in vectors {
        let centered = DVector::from_column_slice(v) - &mean;
        cov += &centered * centered.transpose();
    }
    cov /= n - 1.0;
    for i in 0..d {
        cov[(i, i)] += COVARIANCE_EPSILON;
    }
    // Outer-product accumulation is symmetric up to rounding; make it exact.
    let cov = (&cov + cov.transpose()) * 0.5;
    GaussianFit::new(mean, cov)
}

/// Principal square root of a symmetric positive semi-definite matrix.
pub fn sqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, QualityError> {
    check_symmetric(m, SYMMETRY_TOLERANCE)?;
    let sym = (m + m.transpose()) * 0.5;
    let norm = sym.norm();
    let eig = SymmetricEigen::new(sym);
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -NEGATIVE_EIGEN_TOLERANCE * norm {
            return Err(QualityError::NegativeEigenvalue(*v));
        }
        *v = v.max(0.0).sqrt();
    }
    let vecs = &eig.eigenvectors;
    let s = vecs * DMatrix::from_diagonal(&roots) * vecs.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// `‖μ₁−μ₂‖² + Tr(Σ₁ + Σ₂ − 2·(Σ₁^½ Σ₂ Σ₁^½)^½)`.
pub fn frechet_distance(a: &GaussianFit, b: &GaussianFit) -> Result<f64, QualityError> {
    if a.dim() != b.dim() {
        return Err(QualityError::InconsistentDimensions(format!(
            "{} vs {} dims",
            a.dim(),
            b.dim()
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let diff = &a.mean - &b.mean;
    let root_a = sqrtm_spd(&a.covariance)?;
    let inner = &root_a * &b.covariance * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = sqrtm_spd(&inner)?.trace();
    let d = diff.norm_squared() + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
    Ok(if (-1e-8..0.0).contains(&d) { 0.0 } else { d })
}

/// FID over precomputed embeddings (e.g. externally extracted network features).
pub fn fid_from_embeddings(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, QualityError> {
    let (fa, fb) = (fit_gaussian(a)?, fit_gaussian(b)?);
    let dim = fa.dim();
    if a.len().min(b.len()) < dim {
        log::warn!(
            "FID with {} / {} samples over {dim} dims: covariance is rank-deficient",
            a.len(),
            b.len()
        );
    }
    frechet_distance(&fa, &fb)
}

/// FID between two image groups using the grid-statistics embedding.
pub fn fid(a: &[GrayImage], b: &[GrayImage], grid: usize) -> Result<f64, QualityError> {
    for group in [a, b] {
        if group.len() < 2 {
            return Err(QualityError::TooFewSamples {
                needed: 2,
                got: group.len(),
            });
        }
    }
    let ea = a
        .iter()
        .map(|img| embed(img, grid))
        .collect::<Result<Vec<_>, _>>()?;
    let eb = b
        .iter()
        .map(|img| embed(img, grid))
        .collect::<Result<Vec<_>, _>>()?;
    fid_from_embeddings(&ea, &eb)
}
