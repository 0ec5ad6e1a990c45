use serde::{Deserialize, Serialize};

use super::QualityError;
use crate::imaging::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimParams {
    pub window: usize,
    pub gaussian_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            gaussian_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<(), QualityError> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(QualityError::InvalidParams(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(QualityError::InvalidParams(
                "k1 and k2 must be positive".to_string(),
            ));
        }
        if !(self.gaussian_sigma > 0.0 && self.dynamic_range > 0.0) {
            return Err(QualityError::InvalidParams(
                "sigma and dynamic range must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let half = (window / 2) as f64;
    let taps: Vec<f64> = (0..window)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Separable "valid" filtering of a row-major field.
fn filter_valid(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &data[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = kernel.iter().zip(&line[x..x + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

pub(crate) fn check_pair(a: &GrayImage, b: &GrayImage, window: usize) -> Result<(), QualityError> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(QualityError::DimensionMismatch {
            left: (a.width(), a.height()),
            right: (b.width(), b.height()),
        });
    }
    if a.width() < window || a.height() < window {
        return Err(QualityError::ImageTooSmall {
            size: (a.width(), a.height()),
            window,
        });
    }
    Ok(())
}

/// SSIM map over every valid window position.
pub fn ssim_map(a: &GrayImage, b: &GrayImage, p: &SsimParams) -> Result<Vec<f64>, QualityError> {
    p.validate()?;
    check_pair(a, b, p.window)?;
    let (w, h) = (a.width(), a.height());
    let kernel = gaussian_kernel(p.window, p.gaussian_sigma);
    let c1 = (p.k1 * p.dynamic_range).powi(2);
    let c2 = (p.k2 * p.dynamic_range).powi(2);

    let xa = a.data();
    let xb = b.data();
    let aa: Vec<f64> = xa.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = xb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = xa.iter().zip(xb).map(|(u, v)| u * v).collect();

    let mu_a = filter_valid(xa, w, h, &kernel);
    let mu_b = filter_valid(xb, w, h, &kernel);
    let e_aa = filter_valid(&aa, w, h, &kernel);
    let e_bb = filter_valid(&bb, w, h, &kernel);
    let e_ab = filter_valid(&ab, w, h, &kernel);

    Ok((0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            num / den
        })
        .collect())
}

/// Mean SSIM with Gaussian window weighting.
pub fn ssim(a: &GrayImage, b: &GrayImage, p: &SsimParams) -> Result<f64, QualityError> {
    let map = ssim_map(a, b, p)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x * 7 + y * 13) % 17) as f64 / 16.0)
    }

    #[test]
    fn identity_is_exactly_one() {
        let img = ramp(32, 24);
        assert_eq!(ssim(&img, &img, &SsimParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn kernel_sums_to_one() {
        let k = gaussian_kernel(11, 1.5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[10]);
    }

    #[test]
    fn rejects_mismatch_and_small_images() {
        let p = SsimParams::default();
        let a = ramp(20, 20);
        assert!(matches!(
            ssim(&a, &ramp(20, 21), &p),
            Err(QualityError::DimensionMismatch { .. })
        ));
        let tiny = ramp(8, 20);
        assert!(matches!(
            ssim(&tiny, &tiny, &p),
            Err(QualityError::ImageTooSmall { .. })
        ));
        let even = SsimParams { window: 10, ..p };
        assert!(ssim(&a, &a, &even).is_err());
    }
}
