//! Grayscale loading, thresholding and mask cleanup.
//!
//! Intensities are stored as `f64` in `[0, 1]`, row-major. Vessels are the
//! bright class: a pixel is foreground when its intensity is strictly above
//! the threshold.

use std::collections::VecDeque;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of histogram bins used by [`otsu_threshold`], independent of bit depth.
pub const HISTOGRAM_BINS: usize = 256;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("unreadable file {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("color input rejected ({0}); supply a single-channel image")]
    ColorInput(String),
    #[error("degenerate histogram: image has no intensity variation")]
    DegenerateHistogram,
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("cannot write {path}: {reason}")]
    Write { path: String, reason: String },
}

/// An en-face projection map with intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::Invalid(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(ImagingError::Invalid(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImagingError::Invalid(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)`; values are clamped to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                data.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Vessel/background segmentation; `true` marks a vessel pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ImagingError> {
        if bits.len() != width * height {
            return Err(ImagingError::Invalid(format!(
                "expected {} bits for {width}x{height}, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Bounds-checked read; anything outside the image is background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// Rotates the mask 90° clockwise.
    pub fn rotate90(&self) -> BinaryMask {
        let (w, h) = (self.width, self.height);
        BinaryMask::from_fn(h, w, |x, y| self.get(y, h - 1 - x))
    }

    /// Labels 8-connected components in raster order of their first pixel.
    /// Returns one label per pixel (`0` = background, components start at 1)
    /// and the number of components.
    pub fn label_components(&self) -> (Vec<u32>, usize) {
        let (w, h) = (self.width, self.height);
        let mut labels = vec![0u32; w * h];
        let mut next = 0u32;
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            if !self.bits[start] || labels[start] != 0 {
                continue;
            }
            next += 1;
            labels[start] = next;
            queue.push_back(start);
            while let Some(idx) = queue.pop_front() {
                let (x, y) = ((idx % w) as i64, (idx / w) as i64);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if self.get_signed(nx, ny) {
                            let n = ny as usize * w + nx as usize;
                            if labels[n] == 0 {
                                labels[n] = next;
                                queue.push_back(n);
                            }
                        }
                    }
                }
            }
        }
        (labels, next as usize)
    }

    pub fn component_count(&self) -> usize {
        self.label_components().1
    }
}

/// Bit depth of a stored grayscale raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Loads a single-channel PNG or binary PGM and scales samples by `1 / (2^depth - 1)`.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<GrayImage, ImagingError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| ImagingError::Unreadable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    decode_grayscale(&bytes).map_err(|e| match e {
        ImagingError::Unreadable { reason, .. } => ImagingError::Unreadable {
            path: path.display().to_string(),
            reason,
        },
        other => other,
    })
}

/// Same as [`load_grayscale`] over an in-memory file.
pub fn decode_grayscale(bytes: &[u8]) -> Result<GrayImage, ImagingError> {
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => {
            return Err(ImagingError::UnsupportedFormat(format!("{other:?}")));
        }
        None => {
            return Err(ImagingError::UnsupportedFormat(
                "unrecognized container".to_string(),
            ))
        }
    }
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => ImagingError::UnsupportedFormat(u.to_string()),
        other => unreadable(other.to_string()),
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 255.0)
            .collect(),
        DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 65535.0)
            .collect(),
        other => return Err(ImagingError::ColorInput(format!("{:?}", other.color()))),
    };
    GrayImage::new(width, height, data)
}

fn unreadable(reason: String) -> ImagingError {
    ImagingError::Unreadable {
        path: "<memory>".to_string(),
        reason,
    }
}

/// Writes `img` as PNG (or PGM when the extension is `.pgm`) at the given depth.
pub fn save_grayscale(
    img: &GrayImage,
    path: impl AsRef<Path>,
    depth: BitDepth,
) -> Result<(), ImagingError> {
    let path = path.as_ref();
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pgm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    let (w, h) = (img.width as u32, img.height as u32);
    let dynamic = match depth {
        BitDepth::Eight => {
            let raw = img.data.iter().map(|v| (v * 255.0).round() as u8).collect();
            DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, raw).expect("sized buffer"))
        }
        BitDepth::Sixteen => {
            let raw = img
                .data
                .iter()
                .map(|v| (v * 65535.0).round() as u16)
                .collect();
            DynamicImage::ImageLuma16(
                image::ImageBuffer::from_raw(w, h, raw).expect("sized buffer"),
            )
        }
    };
    let write_err = |e: image::ImageError| ImagingError::Write {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    if format == ImageFormat::Pnm {
        let file = std::fs::File::create(path).map_err(|e| ImagingError::Write {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let encoder = image::codecs::pnm::PnmEncoder::new(std::io::BufWriter::new(file))
            .with_subtype(image::codecs::pnm::PnmSubtype::Graymap(
                image::codecs::pnm::SampleEncoding::Binary,
            ));
        dynamic.write_with_encoder(encoder).map_err(write_err)
    } else {
        dynamic.save_with_format(path, format).map_err(write_err)
    }
}

/// Histogram bin of a normalized intensity.
#[inline]
pub fn histogram_bin(v: f64) -> usize {
    ((v * (HISTOGRAM_BINS - 1) as f64).round() as usize).min(HISTOGRAM_BINS - 1)
}

/// Otsu threshold over a 256-bin histogram.
///
/// Candidate `k` splits the histogram into bins `0..=k` (background) and
/// `k+1..` (foreground) and is reported as intensity `k / 255`. The smallest
/// `k` attaining the maximal between-class variance wins.
pub fn otsu_threshold(img: &GrayImage) -> Result<f64, ImagingError> {
    let mut hist = [0u64; HISTOGRAM_BINS];
    for &v in &img.data {
        hist[histogram_bin(v)] += 1;
    }
    let total = img.data.len() as f64;
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();

    let mut best: Option<(usize, f64)> = None;
    let mut weight_bg = 0.0;
    let mut sum_bg = 0.0;
    for (k, &count) in hist.iter().enumerate().take(HISTOGRAM_BINS - 1) {
        weight_bg += count as f64;
        sum_bg += k as f64 * count as f64;
        let weight_fg = total - weight_bg;
        if weight_bg == 0.0 || weight_fg == 0.0 {
            continue;
        }
        let mean_bg = sum_bg / weight_bg;
        let mean_fg = (total_sum - sum_bg) / weight_fg;
        let diff = mean_bg - mean_fg;
        let between = weight_bg * weight_fg * diff * diff;
        if best.is_none_or(|(_, v)| between > v) {
            best = Some((k, between));
        }
    }
    match best {
        Some((k, v)) if v > 0.0 => Ok(k as f64 / (HISTOGRAM_BINS - 1) as f64),
        _ => Err(ImagingError::DegenerateHistogram),
    }
}

/// `bits[i] = data[i] > threshold`.
pub fn binarize(img: &GrayImage, threshold: f64) -> BinaryMask {
    BinaryMask {
        width: img.width,
        height: img.height,
        bits: img.data.iter().map(|&v| v > threshold).collect(),
    }
}

/// Structuring-element offsets of a digital disk: `dx² + dy² <= r²`.
/// Radius 1 gives the 4-neighbour cross.
fn disk_offsets(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                offsets.push((dx, dy));
            }
        }
    }
    offsets
}

/// Erosion that only inspects in-bounds neighbours.
pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let offsets = disk_offsets(radius);
    let (w, h) = (mask.width as i64, mask.height as i64);
    BinaryMask::from_fn(mask.width, mask.height, |x, y| {
        mask.get(x, y)
            && offsets.iter().all(|&(dx, dy)| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                nx < 0 || ny < 0 || nx >= w || ny >= h || mask.get(nx as usize, ny as usize)
            })
    })
}

pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let offsets = disk_offsets(radius);
    BinaryMask::from_fn(mask.width, mask.height, |x, y| {
        offsets
            .iter()
            .any(|&(dx, dy)| mask.get_signed(x as i64 - dx, y as i64 - dy))
    })
}

pub fn open(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    dilate(&erode(mask, radius), radius)
}

/// Drops 8-connected components with fewer than `min_px` pixels.
pub fn remove_small_components(mask: &BinaryMask, min_px: usize) -> BinaryMask {
    if min_px <= 1 {
        return mask.clone();
    }
    let (labels, n) = mask.label_components();
    let mut sizes = vec![0usize; n + 1];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits: labels
            .iter()
            .map(|&l| l != 0 && sizes[l as usize] >= min_px)
            .collect(),
    }
}

/// Opening followed by small-component removal. Only ever deletes pixels.
pub fn clean_mask(mask: &BinaryMask, min_component_px: usize, opening_radius: usize) -> BinaryMask {
    let opened = open(mask, opening_radius);
    remove_small_components(&opened, min_component_px)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    #[default]
    Otsu,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub threshold_mode: ThresholdMode,
    pub fixed_threshold: f64,
    pub min_component_px: usize,
    pub opening_radius: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            threshold_mode: ThresholdMode::Otsu,
            fixed_threshold: 0.5,
            min_component_px: 20,
            opening_radius: 1,
        }
    }
}

/// Threshold, binarize and clean. A flat image under Otsu yields an empty mask.
pub fn segment(img: &GrayImage, cfg: &SegmentationConfig) -> Result<BinaryMask, ImagingError> {
    let threshold = match cfg.threshold_mode {
        ThresholdMode::Fixed => {
            if !(0.0..=1.0).contains(&cfg.fixed_threshold) {
                return Err(ImagingError::Invalid(format!(
                    "fixed threshold {} outside [0, 1]",
                    cfg.fixed_threshold
                )));
            }
            cfg.fixed_threshold
        }
        ThresholdMode::Otsu => match otsu_threshold(img) {
            Ok(t) => t,
            Err(ImagingError::DegenerateHistogram) => {
                return Ok(BinaryMask::empty(img.width, img.height))
            }
            Err(e) => return Err(e),
        },
    };
    let mask = binarize(img, threshold);
    Ok(clean_mask(&mask, cfg.min_component_px, cfg.opening_radius))
}
