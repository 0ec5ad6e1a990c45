//! Patch-based contrast quality index.
//!
//! Per patch, with Gaussian-weighted statistics of the reference `x` and the
//! test `y` on an 8-bit intensity scale:
//!
//! - contrast change: `(4/π)·atan((σxy + C) / (σx² + C))`
//! - structure: `(σxy + C) / (σx·σy + C)`
//! - mean luminance change: `exp(-|μx − μy| / L)`
//!
//! with `C = 3` and `L = 256`. The score is the mean of their product over
//! patches sampled on a `stride` lattice.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ssim::{check_pair, gaussian_kernel};
use super::QualityError;
use crate::imaging::GrayImage;

/// Intensities are rescaled to this range before computing patch statistics.
const INTENSITY_SCALE: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcqiParams {
    pub window: usize,
    pub stride: usize,
    pub gaussian_sigma: f64,
    pub stabilizer: f64,
    pub luminance_scale: f64,
}

impl Default for PcqiParams {
    fn default() -> Self {
        Self {
            window: 11,
            stride: 4,
            gaussian_sigma: 1.5,
            stabilizer: 3.0,
            luminance_scale: 256.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchTerms {
    pub x: usize,
    pub y: usize,
    pub structure: f64,
    pub contrast: f64,
    pub luminance: f64,
}

impl PatchTerms {
    pub fn score(&self) -> f64 {
        self.structure * self.contrast * self.luminance
    }
}

/// Per-patch terms, patches anchored at their top-left corner.
pub fn pcqi_terms(
    reference: &GrayImage,
    test: &GrayImage,
    p: &PcqiParams,
) -> Result<Vec<PatchTerms>, QualityError> {
    if p.window == 0 || p.stride == 0 {
        return Err(QualityError::InvalidParams(
            "window and stride must be positive".to_string(),
        ));
    }
    if !(p.stabilizer > 0.0 && p.luminance_scale > 0.0 && p.gaussian_sigma > 0.0) {
        return Err(QualityError::InvalidParams(
            "stabilizer, luminance scale and sigma must be positive".to_string(),
        ));
    }
    check_pair(reference, test, p.window)?;
    let taps = gaussian_kernel(p.window, p.gaussian_sigma);
    let k = p.window;
    let c = p.stabilizer;
    let mut out = Vec::new();
    for y0 in (0..=reference.height() - k).step_by(p.stride) {
        for x0 in (0..=reference.width() - k).step_by(p.stride) {
            let (mut mx, mut my) = (0.0, 0.0);
            for j in 0..k {
                for i in 0..k {
                    let wgt = taps[i] * taps[j];
                    mx += wgt * reference.get(x0 + i, y0 + j) * INTENSITY_SCALE;
                    my += wgt * test.get(x0 + i, y0 + j) * INTENSITY_SCALE;
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for j in 0..k {
                for i in 0..k {
                    let wgt = taps[i] * taps[j];
                    let dx = reference.get(x0 + i, y0 + j) * INTENSITY_SCALE - mx;
                    let dy = test.get(x0 + i, y0 + j) * INTENSITY_SCALE - my;
                    vx += wgt * dx * dx;
                    vy += wgt * dy * dy;
                    cov += wgt * dx * dy;
                }
            }
            out.push(PatchTerms {
                x: x0,
                y: y0,
                contrast: (4.0 / PI) * ((cov + c) / (vx + c)).atan(),
                structure: (cov + c) / (vx.sqrt() * vy.sqrt() + c),
                luminance: (-(mx - my).abs() / p.luminance_scale).exp(),
            });
        }
    }
    Ok(out)
}

/// Mean PCQI over sampled patches. Not symmetric: `reference` comes first.
pub fn pcqi(reference: &GrayImage, test: &GrayImage, p: &PcqiParams) -> Result<f64, QualityError> {
    let terms = pcqi_terms(reference, test, p)?;
    Ok(terms.iter().map(PatchTerms::score).sum::<f64>() / terms.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            0.2 + 0.5 * (((x * 3 + y * 5) % 11) as f64 / 10.0)
        })
    }

    #[test]
    fn identity_is_one() {
        let img = texture(40, 30);
        let score = pcqi(&img, &img, &PcqiParams::default()).unwrap();
        assert!((score - 1.0).abs() < 1e-12, "{score}");
    }

    #[test]
    fn stride_controls_patch_count() {
        let img = texture(23, 23);
        let p = PcqiParams::default();
        // positions 0, 4, 8, 12 along each axis
        assert_eq!(pcqi_terms(&img, &img, &p).unwrap().len(), 16);
    }

    #[test]
    fn flat_patches_score_by_luminance_only() {
        let a = GrayImage::new(11, 11, vec![0.2; 121]).unwrap();
        let b = GrayImage::new(11, 11, vec![0.4; 121]).unwrap();
        let t = pcqi_terms(&a, &b, &PcqiParams::default()).unwrap()[0];
        assert!((t.structure - 1.0).abs() < 1e-12);
        assert!((t.contrast - 1.0).abs() < 1e-12);
        assert!((t.luminance - (-51.0f64 / 256.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn zero_stride_rejected() {
        let img = texture(20, 20);
        let p = PcqiParams {
            stride: 0,
            ..Default::default()
        };
        assert!(pcqi(&img, &img, &p).is_err());
    }
}
