#![allow(dead_code)]

use std::path::Path;

use octa_quant::imaging::{dilate, save_grayscale, BinaryMask, BitDepth, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.random::<f64>())
}

/// Box-blurred uniform noise thresholded near its median: blob-like masks
/// with smooth boundaries.
pub fn blob_mask(rng: &mut impl Rng, w: usize, h: usize) -> BinaryMask {
    let noise: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
    let cut = rng.random_range(0.45..0.6);
    let r = 2i64;
    BinaryMask::from_fn(w, h, |x, y| {
        let (mut sum, mut n) = (0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                if xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h {
                    sum += noise[yy as usize * w + xx as usize];
                    n += 1.0;
                }
            }
        }
        sum / n > cut
    })
}

/// Appends the 8-connected pixel path from `from` to `to` (excluding `from`).
fn push_segment(path: &mut Vec<(i64, i64)>, from: (i64, i64), to: (i64, i64)) {
    let (mut x, mut y) = from;
    while (x, y) != to {
        x += (to.0 - x).signum();
        y += (to.1 - y).signum();
        path.push((x, y));
    }
}

/// Rasterizes a polyline of real-valued points into a minimal 8-connected
/// pixel path: no pixel repeats, no pixel is adjacent to the one two steps
/// back, and one-pixel spikes (rounding artefacts where the curve grazes a
/// row or column boundary) are flattened.
pub fn rasterize(points: &[(f64, f64)]) -> Vec<(i64, i64)> {
    let mut raw: Vec<(i64, i64)> = Vec::new();
    for &(px, py) in points {
        let p = (px.round() as i64, py.round() as i64);
        match raw.last() {
            None => raw.push(p),
            Some(&last) if last != p => push_segment(&mut raw, last, p),
            _ => {}
        }
    }
    let mut path: Vec<(i64, i64)> = Vec::new();
    for p in raw {
        while path.len() >= 2 {
            let q = path[path.len() - 2];
            if (q.0 - p.0).abs() <= 1 && (q.1 - p.1).abs() <= 1 {
                path.pop();
            } else {
                break;
            }
        }
        if path.last() != Some(&p) {
            path.push(p);
        }
    }
    for i in 1..path.len().saturating_sub(1) {
        let (a, b) = (path[i - 1], path[i + 1]);
        let (dx, dy) = ((a.0 - b.0).abs(), (a.1 - b.1).abs());
        if (dx, dy) == (2, 0) || (dx, dy) == (0, 2) {
            path[i] = ((a.0 + b.0) / 2, (a.1 + b.1) / 2);
        }
    }
    path
}

/// A wavy curve from `start` heading `angle` (radians) for `length` px.
/// Amplitude and period keep tortuosity in the range of retinal vessels
/// (about 1.0 to 1.15).
pub fn wavy_curve(
    rng: &mut impl Rng,
    start: (f64, f64),
    angle: f64,
    length: f64,
) -> Vec<(f64, f64)> {
    let amp = rng.random_range(0.0..4.0);
    let period = rng.random_range(30.0..60.0);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let (c, s) = (angle.cos(), angle.sin());
    let steps = (length * 4.0) as usize;
    (0..=steps)
        .map(|i| {
            let t = i as f64 / 4.0;
            let off =
                amp * ((t / period) * std::f64::consts::TAU + phase).sin() - amp * phase.sin();
            (start.0 + t * c - off * s, start.1 + t * s + off * c)
        })
        .collect()
}

fn inside(p: (i64, i64), w: usize, h: usize, margin: i64) -> bool {
    p.0 >= margin && p.1 >= margin && p.0 < w as i64 - margin && p.1 < h as i64 - margin
}

/// A single wavy curve that stays `margin` px inside a `w×h` frame.
pub fn curve_path(rng: &mut impl Rng, w: usize, h: usize, margin: i64) -> Vec<(i64, i64)> {
    loop {
        let start = (
            margin as f64 + 4.0,
            h as f64 / 2.0 + rng.random_range(-10.0..10.0),
        );
        let angle = rng.random_range(-0.3..0.3);
        let length = rng.random_range(0.6..0.85) * w as f64;
        let path = rasterize(&wavy_curve(rng, start, angle, length));
        if path.len() > 20 && path.iter().all(|&p| inside(p, w, h, margin)) {
            return path;
        }
    }
}

pub fn paint(mask: &mut BinaryMask, path: &[(i64, i64)]) {
    for &(x, y) in path {
        mask.set(x as usize, y as usize, true);
    }
}

/// A trunk curve plus a few side branches leaving it at random points.
/// Returns the one-pixel mask and the individual curve paths.
pub fn vessel_tree(rng: &mut impl Rng, w: usize, h: usize) -> (BinaryMask, Vec<Vec<(i64, i64)>>) {
    let trunk = curve_path(rng, w, h, 3);
    let mut mask = BinaryMask::empty(w, h);
    paint(&mut mask, &trunk);
    let mut curves = vec![trunk.clone()];
    let branches = rng.random_range(1..4);
    for _ in 0..branches {
        let at = trunk[rng.random_range(trunk.len() / 5..trunk.len() * 4 / 5)];
        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let angle = side * rng.random_range(0.6..1.2);
        let length = rng.random_range(15.0..(h as f64 / 2.0 - 6.0));
        let path = rasterize(&wavy_curve(rng, (at.0 as f64, at.1 as f64), angle, length));
        let path: Vec<_> = path
            .into_iter()
            .take_while(|&p| inside(p, w, h, 3))
            .collect();
        if path.len() > 8 {
            paint(&mut mask, &path);
            curves.push(path);
        }
    }
    (mask, curves)
}

/// Grey-level rendering of a vessel mask: bright vessels of the given
/// radius on a dark, slightly noisy background.
pub fn vessel_image(rng: &mut impl Rng, centerlines: &BinaryMask, radius: usize) -> GrayImage {
    let vessels = dilate(centerlines, radius);
    let fg = rng.random_range(0.7..0.9);
    let bg = rng.random_range(0.05..0.2);
    GrayImage::from_fn(vessels.width(), vessels.height(), |x, y| {
        let base = if vessels.get(x, y) { fg } else { bg };
        base + rng.random_range(-0.04..0.04)
    })
}

pub fn write_png(img: &GrayImage, path: &Path) {
    save_grayscale(img, path, BitDepth::Eight).expect("write test image");
}

/// Writes `n` phantom TR/GT pairs plus a manifest into `dir`; when
/// `identical` the TR file is a byte copy of the GT file.
pub fn write_cohort(dir: &Path, seed: u64, n: usize, identical: bool) -> std::path::PathBuf {
    let mut rng = rng(seed);
    let groups = ["Normal", "DR", "AMD", "CNV"];
    let mut manifest = String::from("patient_id,group,resolution,tr_path,gt_path\n");
    for i in 0..n {
        let (tree, _) = vessel_tree(&mut rng, 96, 96);
        let gt = vessel_image(&mut rng, &tree, 2);
        let gt_name = format!("gt_{i:03}.png");
        let tr_name = format!("tr_{i:03}.png");
        write_png(&gt, &dir.join(&gt_name));
        if identical {
            std::fs::copy(dir.join(&gt_name), dir.join(&tr_name)).unwrap();
        } else {
            let tr = vessel_image(&mut rng, &tree, 1 + i % 2);
            write_png(&tr, &dir.join(&tr_name));
        }
        let resolution = if i % 3 == 2 { "mm6" } else { "mm3" };
        manifest.push_str(&format!(
            "P{i:03},{},{resolution},{tr_name},{gt_name}\n",
            groups[i % groups.len()]
        ));
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues and the eigenvectors as columns of `v`.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Principal square root of a symmetric PSD matrix via [`jacobi_eigen`].
pub fn jacobi_sqrtm(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let (vals, v) = jacobi_eigen(a);
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (0..n)
                .map(|k| v[i][k] * vals[k].max(0.0).sqrt() * v[j][k])
                .sum();
        }
    }
    out
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Two-tailed Student-t p-value by Simpson integration of the unnormalized
/// density, tail over half-line, after mapping `[|t|, ∞)` onto `[0, 1)`.
pub fn t_two_tailed_numeric(t: f64, df: f64) -> f64 {
    let density = |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let integrate_from = |a: f64| {
        let g = |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let x = a + u / (1.0 - u);
            density(x) / ((1.0 - u) * (1.0 - u))
        };
        let n = 20_000;
        let h = 1.0 / n as f64;
        let mut sum = g(0.0) + g(1.0);
        for i in 1..n {
            sum += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0
    };
    integrate_from(t.abs()) / integrate_from(0.0)
}
