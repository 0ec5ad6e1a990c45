//! Vessel density, caliber, tortuosity and perimeter index.
//!
//! All four are literal ratios of pixel quantities. `scale_factor` only
//! affects the display values of density and perimeter index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{segment, BinaryMask, GrayImage, ImagingError, SegmentationConfig};
use crate::vasculature::{
    contour_length, extract_graph, skeletonize, GraphConfig, Skeleton, VesselGraph,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BiomarkerError {
    #[error("empty image")]
    EmptyImage,
    #[error("empty vasculature")]
    EmptyVasculature,
    #[error("degenerate skeleton: vessel area {area} px but zero centerline length")]
    DegenerateSkeleton { area: usize },
    #[error("no measurable branches ({cyclic} cyclic branches excluded)")]
    NoMeasurableBranches { cyclic: usize },
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("segmentation stage: {0}")]
    Segmentation(#[from] ImagingError),
    #[error("biomarker stage: {0}")]
    Biomarker(#[from] BiomarkerError),
}

impl FeatureError {
    pub fn stage(&self) -> &'static str {
        match self {
            FeatureError::Segmentation(_) => "segmentation",
            FeatureError::Biomarker(_) => "biomarkers",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiomarkerSet {
    pub bvd: f64,
    pub bvc: f64,
    pub bvt: f64,
    pub vpi: f64,
    pub scale_factor: f64,
    pub n_branches: usize,
    pub n_cyclic_excluded: usize,
}

impl BiomarkerSet {
    pub fn display_bvd(&self) -> f64 {
        self.bvd * self.scale_factor
    }

    pub fn display_vpi(&self) -> f64 {
        self.vpi * self.scale_factor
    }
}

/// Vessel area over total image area.
pub fn bvd(mask: &BinaryMask) -> Result<f64, BiomarkerError> {
    if mask.area() == 0 {
        return Err(BiomarkerError::EmptyImage);
    }
    Ok(mask.count() as f64 / mask.area() as f64)
}

/// Vessel area over total centerline length (Σ branch geodesic lengths).
pub fn bvc(mask: &BinaryMask, graph: &VesselGraph, skel: &Skeleton) -> Result<f64, BiomarkerError> {
    debug_assert_eq!(skel.width(), graph.width);
    let area = mask.count();
    if area == 0 {
        return Err(BiomarkerError::EmptyVasculature);
    }
    let length = graph.total_length();
    if length <= 0.0 {
        return Err(BiomarkerError::DegenerateSkeleton { area });
    }
    Ok(area as f64 / length)
}

/// Mean geodesic/euclidean ratio over non-cyclic branches.
pub fn bvt(graph: &VesselGraph) -> Result<f64, BiomarkerError> {
    let ratios: Vec<f64> = graph
        .branches
        .iter()
        .filter(|b| !b.cyclic)
        .map(|b| b.geodesic_length / b.euclidean_length())
        .collect();
    if ratios.is_empty() {
        return Err(BiomarkerError::NoMeasurableBranches {
            cyclic: graph.cyclic_count(),
        });
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Contour length over vessel area.
pub fn vpi(mask: &BinaryMask, contour: f64) -> Result<f64, BiomarkerError> {
    let area = mask.count();
    if area == 0 {
        return Err(BiomarkerError::EmptyVasculature);
    }
    Ok(contour / area as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub segmentation: SegmentationConfig,
    pub graph: GraphConfig,
    pub scale_factor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            segmentation: SegmentationConfig::default(),
            graph: GraphConfig::default(),
            scale_factor: 1.0,
        }
    }
}

/// Intermediate products of one image's analysis, kept for debug dumps.
#[derive(Debug, Clone)]
pub struct VesselAnalysis {
    pub mask: BinaryMask,
    pub skeleton: Skeleton,
    pub graph: VesselGraph,
    pub contour_length: f64,
}

impl VesselAnalysis {
    pub fn from_mask(mask: BinaryMask, graph_cfg: &GraphConfig) -> Self {
        let skeleton = skeletonize(&mask);
        let graph = extract_graph(&skeleton, graph_cfg);
        let contour_length = contour_length(&mask);
        Self {
            mask,
            skeleton,
            graph,
            contour_length,
        }
    }

    pub fn biomarkers(&self, scale_factor: f64) -> Result<BiomarkerSet, BiomarkerError> {
        let bvd = bvd(&self.mask)?;
        let bvc = bvc(&self.mask, &self.graph, &self.skeleton)?;
        let vpi = vpi(&self.mask, self.contour_length)?;
        let bvt = bvt(&self.graph)?;
        Ok(BiomarkerSet {
            bvd,
            bvc,
            bvt,
            vpi,
            scale_factor,
            n_branches: self.graph.branch_count(),
            n_cyclic_excluded: self.graph.cyclic_count(),
        })
    }
}

/// Biomarkers for a known vessel mask, skipping segmentation.
pub fn biomarkers_from_mask(
    mask: &BinaryMask,
    cfg: &FeatureConfig,
) -> Result<BiomarkerSet, BiomarkerError> {
    VesselAnalysis::from_mask(mask.clone(), &cfg.graph).biomarkers(cfg.scale_factor)
}

/// Full chain: segmentation, cleanup, skeleton, graph, features.
pub fn analyze(img: &GrayImage, cfg: &FeatureConfig) -> Result<VesselAnalysis, FeatureError> {
    let mask = segment(img, &cfg.segmentation)?;
    Ok(VesselAnalysis::from_mask(mask, &cfg.graph))
}

pub fn biomarker_set(img: &GrayImage, cfg: &FeatureConfig) -> Result<BiomarkerSet, FeatureError> {
    Ok(analyze(img, cfg)?.biomarkers(cfg.scale_factor)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vasculature::Skeleton;

    fn line_mask(len: usize) -> BinaryMask {
        BinaryMask::from_fn(len + 4, 5, |x, y| y == 2 && (2..len + 2).contains(&x))
    }

    #[test]
    fn bvd_counts() {
        assert_eq!(bvd(&BinaryMask::from_fn(4, 4, |_, _| true)).unwrap(), 1.0);
        assert_eq!(bvd(&BinaryMask::empty(4, 4)).unwrap(), 0.0);
        let quarter = BinaryMask::from_fn(256, 256, |_, y| y < 64);
        assert_eq!(quarter.count(), 16384);
        assert_eq!(bvd(&quarter).unwrap(), 0.25);
        assert_eq!(
            bvd(&BinaryMask::empty(0, 0)),
            Err(BiomarkerError::EmptyImage)
        );
    }

    #[test]
    fn bvc_of_thin_line() {
        let mask = line_mask(10);
        let skel = skeletonize(&mask);
        let graph = extract_graph(&skel, &GraphConfig::default());
        assert!((bvc(&mask, &graph, &skel).unwrap() - 10.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn bvc_errors() {
        let empty = BinaryMask::empty(5, 5);
        let skel = Skeleton::from_thin_mask(empty.clone());
        let graph = extract_graph(&skel, &GraphConfig::default());
        assert_eq!(
            bvc(&empty, &graph, &skel),
            Err(BiomarkerError::EmptyVasculature)
        );
        let dot = BinaryMask::from_fn(5, 5, |x, y| x == 2 && y == 2);
        let skel = skeletonize(&dot);
        let graph = extract_graph(&skel, &GraphConfig::default());
        assert_eq!(
            bvc(&dot, &graph, &skel),
            Err(BiomarkerError::DegenerateSkeleton { area: 1 })
        );
    }

    #[test]
    fn bvt_l_branch_is_sqrt2() {
        let mut mask = BinaryMask::empty(12, 12);
        for i in 0..=10 {
            mask.set(i, 0, true);
            mask.set(10, i, true);
        }
        let graph = extract_graph(&Skeleton::from_thin_mask(mask), &GraphConfig::default());
        assert!((bvt(&graph).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bvt_straight_is_one_and_loop_only_errors() {
        let graph = extract_graph(&skeletonize(&line_mask(12)), &GraphConfig::default());
        assert_eq!(bvt(&graph).unwrap(), 1.0);

        let ring = BinaryMask::from_fn(10, 10, |x, y| {
            (x == 2 || x == 7) && (2..=7).contains(&y) || (y == 2 || y == 7) && (2..=7).contains(&x)
        });
        let graph = extract_graph(&Skeleton::from_thin_mask(ring), &GraphConfig::default());
        assert_eq!(
            bvt(&graph),
            Err(BiomarkerError::NoMeasurableBranches { cyclic: 1 })
        );
    }

    #[test]
    fn vpi_of_squares() {
        let one = BinaryMask::from_fn(30, 30, |x, y| (5..15).contains(&x) && (5..15).contains(&y));
        assert!((vpi(&one, contour_length(&one)).unwrap() - 0.36).abs() < 1e-12);
        let two = BinaryMask::from_fn(40, 30, |x, y| {
            (5..15).contains(&y) && ((5..15).contains(&x) || (20..30).contains(&x))
        });
        assert_eq!(contour_length(&two), 72.0);
        assert!((vpi(&two, 72.0).unwrap() - 0.36).abs() < 1e-12);
        assert_eq!(
            vpi(&BinaryMask::empty(3, 3), 0.0),
            Err(BiomarkerError::EmptyVasculature)
        );
    }

    #[test]
    fn blank_image_fails_in_biomarker_stage() {
        let img = GrayImage::new(32, 32, vec![0.0; 1024]).unwrap();
        let err = biomarker_set(&img, &FeatureConfig::default()).unwrap_err();
        assert_eq!(err.stage(), "biomarkers");
        assert!(err.to_string().contains("empty vasculature"), "{err}");
    }

    #[test]
    fn deterministic_for_fixed_config() {
        let img = GrayImage::from_fn(64, 64, |x, y| {
            let d = (x as f64 - 32.0).abs().min((y as f64 - 20.0).abs());
            if d < 2.0 {
                0.9
            } else {
                0.1
            }
        });
        let cfg = FeatureConfig::default();
        let a = biomarker_set(&img, &cfg).unwrap();
        let b = biomarker_set(&img, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
