mod common;

use octa_quant::biomarkers::{biomarkers_from_mask, bvd, vpi, FeatureConfig};
use octa_quant::imaging::{binarize, clean_mask, BinaryMask, GrayImage};
use octa_quant::quality::{fid, pcqi, ssim, PcqiParams, SsimParams};
use octa_quant::stats::{summarize, welch_ttest};
use octa_quant::vasculature::{contour_length, extract_graph, skeletonize, GraphConfig};
use proptest::prelude::*;

fn image(w: usize, h: usize) -> impl Strategy<Value = GrayImage> {
    prop::collection::vec(0.0f64..=1.0, w * h).prop_map(move |d| GrayImage::new(w, h, d).unwrap())
}

fn blob(seed: u64, size: usize) -> BinaryMask {
    common::blob_mask(&mut common::rng(seed), size, size)
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 2..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binarize_is_monotone(img in image(12, 12), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(binarize(&img, hi).is_subset_of(&binarize(&img, lo)));
    }

    #[test]
    fn clean_mask_is_a_subset(seed in any::<u64>(), min_px in 0usize..40, radius in 0usize..3) {
        let m = blob(seed, 32);
        prop_assert!(clean_mask(&m, min_px, radius).is_subset_of(&m));
    }

    #[test]
    fn skeleton_is_subset_and_keeps_components(seed in any::<u64>()) {
        let m = blob(seed, 48);
        let skel = skeletonize(&m);
        prop_assert!(skel.as_mask().is_subset_of(&m));
        prop_assert_eq!(skel.as_mask().component_count(), m.component_count());
    }

    #[test]
    fn graph_accounts_for_every_skeleton_pixel(seed in any::<u64>()) {
        let skel = skeletonize(&blob(seed, 48));
        let g = extract_graph(&skel, &GraphConfig::default());
        prop_assert_eq!(g.accounted_pixels(), skel.pixel_count());
    }

    #[test]
    fn area_and_perimeter_features_are_rotation_invariant(seed in any::<u64>()) {
        let m = blob(seed, 40);
        prop_assume!(m.count() > 0);
        let r = m.rotate90();
        prop_assert_eq!(bvd(&m).unwrap(), bvd(&r).unwrap());
        let (a, b) = (contour_length(&m), contour_length(&r));
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        prop_assert!((vpi(&m, a).unwrap() - vpi(&r, b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tortuosity_is_at_least_one(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (mask, _) = common::vessel_tree(&mut rng, 96, 96);
        let set = biomarkers_from_mask(&mask, &FeatureConfig::default()).unwrap();
        prop_assert!(set.bvt >= 1.0);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(a in image(16, 16), b in image(16, 16)) {
        let p = SsimParams::default();
        let (ab, ba) = (ssim(&a, &b, &p).unwrap(), ssim(&b, &a, &p).unwrap());
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn pcqi_of_identical_images_is_one(a in image(20, 20)) {
        prop_assert!((pcqi(&a, &a, &PcqiParams::default()).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fid_ignores_sample_order(
        a in prop::collection::vec(image(8, 8), 3..6),
        b in prop::collection::vec(image(8, 8), 3..6),
        shift in 0usize..5,
    ) {
        let d = fid(&a, &b, 2).unwrap();
        let mut a2 = a.clone();
        a2.rotate_left(shift % a.len());
        a2.reverse();
        prop_assert!((fid(&a2, &b, 2).unwrap() - d).abs() <= 1e-9 * d.max(1.0));
        prop_assert!((fid(&b, &a, 2).unwrap() - d).abs() <= 1e-9 * d.max(1.0));
        prop_assert!(d >= 0.0);
    }

    #[test]
    fn summary_scales_linearly(v in sample(), c in 0.1f64..10.0, shift in -100.0f64..100.0) {
        let s = summarize(&v).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| c * x + shift).collect();
        let t = summarize(&scaled).unwrap();
        prop_assert!((t.mean - (c * s.mean + shift)).abs() <= 1e-9 * (1.0 + t.mean.abs()));
        prop_assert!((t.std - c * s.std).abs() <= 1e-9 * (1.0 + t.std));
        prop_assert!(t.min <= t.mean && t.mean <= t.max);
    }

    #[test]
    fn welch_is_invariant_to_common_shift_and_scale(
        a in sample(), b in sample(), c in 0.5f64..4.0, shift in -100.0f64..100.0,
    ) {
        let base = welch_ttest(&a, &b);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        let f = |v: &[f64]| v.iter().map(|x| c * x + shift).collect::<Vec<_>>();
        let moved = welch_ttest(&f(&a), &f(&b)).unwrap();
        prop_assert!((moved.t_statistic - base.t_statistic).abs() <= 1e-7 * (1.0 + base.t_statistic.abs()));
        prop_assert!((moved.p_value - base.p_value).abs() <= 1e-7);
        let swapped = welch_ttest(&b, &a).unwrap();
        prop_assert_eq!(swapped.t_statistic, -base.t_statistic);
        prop_assert_eq!(swapped.p_value, base.p_value);
    }
}
