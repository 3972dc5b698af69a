//! Augmentation of 8-bit RGB renders.
//!
//! [`augment_pipeline`] applies, in order: optional crop, optional
//! degradation, color cast, channel swap, optional occlusion and a JPEG
//! round trip. Every stage draws from its own RNG stream derived from the
//! pipeline seed, so switching one stage off leaves the others untouched.
//! The returned [`AugmentRecord`] replays the exact output via [`replay`].

use std::path::Path;

use image::codecs::jpeg::JpegEncoder;
use image::imageops::{self, FilterType};
use image::{ImageFormat, Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{stage_rng, StageRng};

/// The five channel orders other than RGB. `out[c] = in[perm[c]]`.
pub const NON_IDENTITY_PERMUTATIONS: [[usize; 3]; 5] =
    [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub jpeg_quality: u8,
    pub color_cast_prob_per_channel: f64,
    pub color_cast_range: i32,
    pub channel_swap_prob: f64,
    pub degrade_fraction: f64,
    /// Area (pixels²) degraded images are reduced to. When unset, a target is
    /// drawn uniformly from 5–30% of the source area.
    pub degrade_target_area: Option<u64>,
    pub occlusion_fraction: f64,
    pub occlusion_size_range: (f64, f64),
    pub crop_prob: f64,
    pub crop_fraction: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            jpeg_quality: 90,
            color_cast_prob_per_channel: 0.5,
            color_cast_range: 20,
            channel_swap_prob: 0.5,
            degrade_fraction: 0.25,
            degrade_target_area: None,
            occlusion_fraction: 0.35,
            occlusion_size_range: (0.2, 0.6),
            crop_prob: 0.5,
            crop_fraction: 0.6,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Everything off except a quality-100 JPEG pass.
    pub fn disabled() -> Self {
        Self {
            jpeg_quality: 100,
            color_cast_prob_per_channel: 0.0,
            channel_swap_prob: 0.0,
            degrade_fraction: 0.0,
            occlusion_fraction: 0.0,
            crop_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_quality(self.jpeg_quality)?;
        for (name, p) in [
            (
                "color_cast_prob_per_channel",
                self.color_cast_prob_per_channel,
            ),
            ("channel_swap_prob", self.channel_swap_prob),
            ("degrade_fraction", self.degrade_fraction),
            ("occlusion_fraction", self.occlusion_fraction),
            ("crop_prob", self.crop_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::input(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.color_cast_range < 0 || self.color_cast_range > 255 {
            return Err(Error::input("color_cast_range must be in [0, 255]"));
        }
        let (lo, hi) = self.occlusion_size_range;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::input(
                "occlusion_size_range must satisfy 0 < lo <= hi < 1",
            ));
        }
        if !(0.0 < self.crop_fraction && self.crop_fraction < 1.0) {
            return Err(Error::input("crop_fraction must be in (0, 1)"));
        }
        Ok(())
    }
}

fn check_quality(q: u8) -> Result<()> {
    if !(1..=100).contains(&q) {
        return Err(Error::input(format!(
            "JPEG quality must be in [1, 100], got {q}"
        )));
    }
    Ok(())
}

/// Encodes with the baseline JPEG encoder and decodes again.
pub fn jpeg_roundtrip(img: &RgbImage, quality: u8) -> Result<RgbImage> {
    check_quality(quality)?;
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality).encode_image(img)?;
    Ok(image::load_from_memory_with_format(&buf, ImageFormat::Jpeg)?.to_rgb8())
}

/// Adds a per-channel offset, clamped to `[0, 255]`.
pub fn apply_color_cast(img: &RgbImage, offsets: [i32; 3]) -> RgbImage {
    let mut out = img.clone();
    for p in out.pixels_mut() {
        for (v, o) in p.0.iter_mut().zip(offsets) {
            *v = (i32::from(*v) + o).clamp(0, 255) as u8;
        }
    }
    out
}

/// Draws offsets: each channel, with probability `prob`, gets a uniform
/// integer in `[-range, range]`; otherwise 0.
pub fn sample_color_cast(rng: &mut StageRng, prob: f64, range: i32) -> [i32; 3] {
    let mut offsets = [0; 3];
    for o in &mut offsets {
        let fire = rng.gen_bool(prob);
        let v = rng.gen_range(-range..=range);
        if fire {
            *o = v;
        }
    }
    offsets
}

pub fn color_cast(img: &RgbImage, cfg: &AugmentConfig, seed: u64) -> (RgbImage, [i32; 3]) {
    let offsets = sample_color_cast(
        &mut stage_rng(seed, "augment/color_cast"),
        cfg.color_cast_prob_per_channel,
        cfg.color_cast_range,
    );
    (apply_color_cast(img, offsets), offsets)
}

pub fn apply_permutation(img: &RgbImage, perm: [usize; 3]) -> RgbImage {
    let mut out = img.clone();
    for (o, i) in out.pixels_mut().zip(img.pixels()) {
        *o = Rgb([i.0[perm[0]], i.0[perm[1]], i.0[perm[2]]]);
    }
    out
}

/// `first` then `second`, as a single permutation.
pub fn compose_permutations(first: [usize; 3], second: [usize; 3]) -> [usize; 3] {
    [first[second[0]], first[second[1]], first[second[2]]]
}

pub fn sample_channel_swap(rng: &mut StageRng, prob: f64) -> Option<[usize; 3]> {
    let fire = rng.gen_bool(prob);
    let idx = rng.gen_range(0..NON_IDENTITY_PERMUTATIONS.len() as u32) as usize;
    fire.then_some(NON_IDENTITY_PERMUTATIONS[idx])
}

pub fn channel_swap(img: &RgbImage, prob: f64, seed: u64) -> (RgbImage, Option<[usize; 3]>) {
    let perm = sample_channel_swap(&mut stage_rng(seed, "augment/channel_swap"), prob);
    let out = match perm {
        Some(p) => apply_permutation(img, p),
        None => img.clone(),
    };
    (out, perm)
}

/// Area-weighted box filter to `w × h`.
fn box_downsample(img: &RgbImage, w: u32, h: u32) -> RgbImage {
    let (sw, sh) = img.dimensions();
    // Horizontal pass into f64 rows, then vertical.
    let sx = f64::from(sw) / f64::from(w);
    let sy = f64::from(sh) / f64::from(h);
    let mut tmp = vec![[0.0f64; 3]; (w * sh) as usize];
    for y in 0..sh {
        for ox in 0..w {
            let (x0, x1) = (f64::from(ox) * sx, f64::from(ox + 1) * sx);
            let mut acc = [0.0; 3];
            let mut x = x0.floor() as u32;
            while f64::from(x) < x1 && x < sw {
                let cover = (f64::from(x + 1).min(x1) - f64::from(x).max(x0)).max(0.0);
                let p = img.get_pixel(x, y).0;
                for c in 0..3 {
                    acc[c] += cover * f64::from(p[c]);
                }
                x += 1;
            }
            tmp[(y * w + ox) as usize] = acc.map(|a| a / sx);
        }
    }
    let mut out = RgbImage::new(w, h);
    for oy in 0..h {
        let (y0, y1) = (f64::from(oy) * sy, f64::from(oy + 1) * sy);
        for ox in 0..w {
            let mut acc = [0.0; 3];
            let mut y = y0.floor() as u32;
            while f64::from(y) < y1 && y < sh {
                let cover = (f64::from(y + 1).min(y1) - f64::from(y).max(y0)).max(0.0);
                let p = tmp[(y * w + ox) as usize];
                for c in 0..3 {
                    acc[c] += cover * p[c];
                }
                y += 1;
            }
            out.put_pixel(
                ox,
                oy,
                Rgb(acc.map(|a| (a / sy).round().clamp(0.0, 255.0) as u8)),
            );
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegradeRecord {
    pub target_area: u64,
    pub width: u32,
    pub height: u32,
}

/// Low-resolution size with area close to `target_area` and the source aspect ratio.
pub fn degraded_size(width: u32, height: u32, target_area: u64) -> Result<(u32, u32)> {
    let area = u64::from(width) * u64::from(height);
    if target_area == 0 || target_area >= area {
        return Err(Error::input(format!(
            "degrade target area {target_area} must be in [1, {area})"
        )));
    }
    let scale = (target_area as f64 / area as f64).sqrt();
    let w = ((f64::from(width) * scale).round() as u32).clamp(1, width);
    let h = ((f64::from(height) * scale).round() as u32).clamp(1, height);
    Ok((w, h))
}

/// Box-downsamples to `target_area`, then upsamples back to the original size.
pub fn degrade(img: &RgbImage, target_area: u64) -> Result<(RgbImage, DegradeRecord)> {
    let (w, h) = degraded_size(img.width(), img.height(), target_area)?;
    let rec = DegradeRecord {
        target_area,
        width: w,
        height: h,
    };
    Ok((apply_degrade(img, &rec), rec))
}

fn apply_degrade(img: &RgbImage, rec: &DegradeRecord) -> RgbImage {
    let small = box_downsample(img, rec.width, rec.height);
    imageops::resize(&small, img.width(), img.height(), FilterType::Triangle)
}

/// Nearest-rank `q`-quantile (`q` in `[0, 1]`) of box areas.
pub fn area_percentile(areas: &[f64], q: f64) -> Result<f64> {
    if areas.is_empty() {
        return Err(Error::input("no box areas given"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::input("quantile must be in [0, 1]"));
    }
    let mut sorted = areas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Reads one box area per line (blank lines and `#` comments ignored).
pub fn read_box_areas(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::input(format!("bad box area {l:?}")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

/// Where occluder pixels come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PatchSource {
    UniformColor,
    ImageCorpus(Vec<RgbImage>),
}

impl PatchSource {
    /// Loads every PNG/JPEG in `dir`, sorted by file name.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let images = load_image_dir(dir)?
            .into_iter()
            .map(|(_, img)| img)
            .collect::<Vec<_>>();
        if images.is_empty() {
            return Err(Error::input(format!(
                "occluder corpus {} has no images",
                dir.display()
            )));
        }
        Ok(PatchSource::ImageCorpus(images))
    }
}

/// Lists PNG/JPEG files in `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io("listing directory", e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn load_image_dir(dir: &Path) -> Result<Vec<(std::path::PathBuf, RgbImage)>> {
    list_images(dir)?
        .into_iter()
        .map(|p| {
            let img = image::open(&p)
                .map_err(|e| Error::input(format!("reading {}: {e}", p.display())))?
                .to_rgb8();
            Ok((p, img))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OcclusionFill {
    Color([u8; 3]),
    /// Window of corpus image `index` at (`x`, `y`), resized to the rectangle
    /// when the corpus image is smaller than it.
    Patch {
        index: usize,
        x: u32,
        y: u32,
        resized: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionRecord {
    pub rect: Rect,
    pub fill: OcclusionFill,
}

/// Rectangle sides are independent uniform fractions of the image sides.
fn sample_rect(rng: &mut StageRng, w: u32, h: u32, range: (f64, f64)) -> Rect {
    let fw = rng.gen_range(range.0..=range.1);
    let fh = rng.gen_range(range.0..=range.1);
    let rw = ((f64::from(w) * fw).round() as u32).clamp(1, w);
    let rh = ((f64::from(h) * fh).round() as u32).clamp(1, h);
    let x = rng.gen_range(0..=w - rw);
    let y = rng.gen_range(0..=h - rh);
    Rect {
        x,
        y,
        width: rw,
        height: rh,
    }
}

/// Places one rectangular occluder. Geometry and fill use separate streams,
/// so both sources give the same rectangle for the same seed.
pub fn occlude(
    img: &RgbImage,
    cfg: &AugmentConfig,
    seed: u64,
    source: &PatchSource,
) -> Result<(RgbImage, OcclusionRecord)> {
    let rect = sample_rect(
        &mut stage_rng(seed, "augment/occlusion/geometry"),
        img.width(),
        img.height(),
        cfg.occlusion_size_range,
    );
    let mut rng = stage_rng(seed, "augment/occlusion/fill");
    let fill = match source {
        PatchSource::UniformColor => OcclusionFill::Color([rng.gen(), rng.gen(), rng.gen()]),
        PatchSource::ImageCorpus(images) => {
            if images.is_empty() {
                return Err(Error::input("occluder corpus is empty"));
            }
            let index = rng.gen_range(0..images.len() as u32) as usize;
            let src = &images[index];
            if src.width() >= rect.width && src.height() >= rect.height {
                OcclusionFill::Patch {
                    index,
                    x: rng.gen_range(0..=src.width() - rect.width),
                    y: rng.gen_range(0..=src.height() - rect.height),
                    resized: false,
                }
            } else {
                OcclusionFill::Patch {
                    index,
                    x: 0,
                    y: 0,
                    resized: true,
                }
            }
        }
    };
    let rec = OcclusionRecord { rect, fill };
    Ok((apply_occlusion(img, &rec, source)?, rec))
}

fn apply_occlusion(
    img: &RgbImage,
    rec: &OcclusionRecord,
    source: &PatchSource,
) -> Result<RgbImage> {
    let r = rec.rect;
    let patch = match (&rec.fill, source) {
        (OcclusionFill::Color(c), _) => RgbImage::from_pixel(r.width, r.height, Rgb(*c)),
        (
            OcclusionFill::Patch {
                index,
                x,
                y,
                resized,
            },
            PatchSource::ImageCorpus(images),
        ) => {
            let src = images
                .get(*index)
                .ok_or_else(|| Error::input(format!("occluder corpus has no image {index}")))?;
            if *resized {
                imageops::resize(src, r.width, r.height, FilterType::Triangle)
            } else {
                imageops::crop_imm(src, *x, *y, r.width, r.height).to_image()
            }
        }
        (OcclusionFill::Patch { .. }, PatchSource::UniformColor) => {
            return Err(Error::input("record needs an occluder corpus to replay"));
        }
    };
    let mut out = img.clone();
    imageops::replace(&mut out, &patch, i64::from(r.x), i64::from(r.y));
    Ok(out)
}

/// Window with `fraction` of the source area, same aspect ratio.
fn sample_crop(rng: &mut StageRng, w: u32, h: u32, fraction: f64) -> Rect {
    let s = fraction.sqrt();
    let cw = ((f64::from(w) * s).round() as u32).clamp(1, w);
    let ch = ((f64::from(h) * s).round() as u32).clamp(1, h);
    let x = rng.gen_range(0..=w - cw);
    let y = rng.gen_range(0..=h - ch);
    Rect {
        x,
        y,
        width: cw,
        height: ch,
    }
}

fn apply_crop(img: &RgbImage, r: &Rect) -> RgbImage {
    let window = imageops::crop_imm(img, r.x, r.y, r.width, r.height).to_image();
    if window.dimensions() == img.dimensions() {
        return window;
    }
    imageops::resize(&window, img.width(), img.height(), FilterType::Triangle)
}

/// Random window of `fraction` of the area, resized back to the source size.
pub fn crop(img: &RgbImage, fraction: f64, seed: u64) -> Result<(RgbImage, Rect)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::input(format!(
            "crop fraction must be in (0, 1), got {fraction}"
        )));
    }
    let r = sample_crop(
        &mut stage_rng(seed, "augment/crop"),
        img.width(),
        img.height(),
        fraction,
    );
    Ok((apply_crop(img, &r), r))
}

/// Every operation applied by the pipeline, with its parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord {
    pub crop: Option<Rect>,
    pub degrade: Option<DegradeRecord>,
    pub color_cast: Option<[i32; 3]>,
    pub channel_swap: Option<[usize; 3]>,
    pub occlusion: Option<OcclusionRecord>,
    pub jpeg_quality: Option<u8>,
}

pub fn augment_pipeline(
    img: &RgbImage,
    cfg: &AugmentConfig,
    seed: u64,
    source: &PatchSource,
) -> Result<(RgbImage, AugmentRecord)> {
    cfg.validate()?;
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::input("image is empty"));
    }
    let mut rec = AugmentRecord::default();

    let mut rng = stage_rng(seed, "augment/crop");
    let fire = rng.gen_bool(cfg.crop_prob);
    let window = sample_crop(&mut rng, w, h, cfg.crop_fraction);
    rec.crop = fire.then_some(window);

    let mut rng = stage_rng(seed, "augment/degrade");
    let fire = rng.gen_bool(cfg.degrade_fraction);
    let area = u64::from(w) * u64::from(h);
    let drawn = (area as f64 * rng.gen_range(0.05..=0.30)).round() as u64;
    let target = cfg
        .degrade_target_area
        .unwrap_or(drawn)
        .clamp(1, area.saturating_sub(1).max(1));
    if fire && area > 1 {
        let (dw, dh) = degraded_size(w, h, target)?;
        rec.degrade = Some(DegradeRecord {
            target_area: target,
            width: dw,
            height: dh,
        });
    }

    let offsets = sample_color_cast(
        &mut stage_rng(seed, "augment/color_cast"),
        cfg.color_cast_prob_per_channel,
        cfg.color_cast_range,
    );
    rec.color_cast = (offsets != [0; 3]).then_some(offsets);

    rec.channel_swap = sample_channel_swap(
        &mut stage_rng(seed, "augment/channel_swap"),
        cfg.channel_swap_prob,
    );

    let fire = stage_rng(seed, "augment/occlusion").gen_bool(cfg.occlusion_fraction);
    if fire {
        rec.occlusion = Some(occlude(img, cfg, seed, source)?.1);
    }

    rec.jpeg_quality = Some(cfg.jpeg_quality);
    let out = replay(img, &rec, source)?;
    Ok((out, rec))
}

/// Re-applies a record's operations in pipeline order.
pub fn replay(img: &RgbImage, rec: &AugmentRecord, source: &PatchSource) -> Result<RgbImage> {
    let mut out = img.clone();
    if let Some(r) = &rec.crop {
        if r.x + r.width > out.width() || r.y + r.height > out.height() {
            return Err(Error::input("crop window outside the image"));
        }
        out = apply_crop(&out, r);
    }
    if let Some(d) = &rec.degrade {
        out = apply_degrade(&out, d);
    }
    if let Some(o) = rec.color_cast {
        out = apply_color_cast(&out, o);
    }
    if let Some(p) = rec.channel_swap {
        out = apply_permutation(&out, p);
    }
    if let Some(o) = &rec.occlusion {
        out = apply_occlusion(&out, o, source)?;
    }
    if let Some(q) = rec.jpeg_quality {
        out = jpeg_roundtrip(&out, q)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    /// Smooth color gradient with a soft disc, the kind of content renders have.
    fn test_card(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            let fx = f64::from(x) / f64::from(w);
            let fy = f64::from(y) / f64::from(h);
            let d = ((fx - 0.5).powi(2) + (fy - 0.5).powi(2)).sqrt();
            let disc = (1.0 - (d / 0.35).powi(2)).max(0.0);
            Rgb([
                (40.0 + 150.0 * fx + 50.0 * disc) as u8,
                (60.0 + 120.0 * fy + 40.0 * disc) as u8,
                (200.0 - 100.0 * fx * fy) as u8,
            ])
        })
    }

    fn sharp_card(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            let v = if (x / 4 + y / 4) % 2 == 0 { 20 } else { 235 };
            Rgb([v, 255 - v, v])
        })
    }

    fn checkerboard(w: u32, h: u32, cell: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            let v = if (x / cell + y / cell).is_multiple_of(2) {
                0
            } else {
                255
            };
            Rgb([v, v, v])
        })
    }

    fn max_dev(a: &RgbImage, b: &RgbImage) -> u8 {
        a.as_raw()
            .iter()
            .zip(b.as_raw())
            .map(|(x, y)| x.abs_diff(*y))
            .max()
            .unwrap()
    }

    fn mean_dev(a: &RgbImage, b: &RgbImage) -> f64 {
        a.as_raw()
            .iter()
            .zip(b.as_raw())
            .map(|(x, y)| f64::from(x.abs_diff(*y)))
            .sum::<f64>()
            / a.as_raw().len() as f64
    }

    fn variance(img: &RgbImage) -> f64 {
        let v: Vec<f64> = img.as_raw().iter().map(|&x| f64::from(x)).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn jpeg_quality_bounds() {
        let card = test_card(96, 64);
        let out = jpeg_roundtrip(&card, 100).unwrap();
        assert_eq!(out.dimensions(), card.dimensions());
        assert!(max_dev(&card, &out) <= 3, "{}", max_dev(&card, &out));
        let sharp = sharp_card(64, 64);
        let lo = mean_dev(&sharp, &jpeg_roundtrip(&sharp, 10).unwrap());
        let hi = mean_dev(&sharp, &jpeg_roundtrip(&sharp, 90).unwrap());
        assert!(lo > hi, "{lo} <= {hi}");
        assert!(jpeg_roundtrip(&card, 0).is_err());
        assert!(jpeg_roundtrip(&card, 101).is_err());
    }

    #[test]
    fn color_cast_behaviour() {
        let card = test_card(16, 16);
        let cfg = AugmentConfig {
            color_cast_prob_per_channel: 0.0,
            ..AugmentConfig::default()
        };
        let (out, offsets) = color_cast(&card, &cfg, 3);
        assert_eq!(offsets, [0; 3]);
        assert_eq!(out, card);
        let white = RgbImage::from_pixel(4, 4, Rgb([255, 255, 255]));
        assert_eq!(apply_color_cast(&white, [20, 5, 1]), white);
        let black = RgbImage::from_pixel(4, 4, Rgb([0, 0, 0]));
        assert_eq!(apply_color_cast(&black, [-20, -5, -1]), black);
    }

    #[test]
    fn color_cast_offsets_are_uniform() {
        let mut rng = rng_from_seed(17);
        let mut values = Vec::new();
        let mut fired = 0;
        let draws = 10_000;
        for _ in 0..draws {
            let o = sample_color_cast(&mut rng, 1.0, 20);
            values.push(o[0]);
            let p = sample_color_cast(&mut rng, 0.5, 20);
            fired += p.iter().filter(|v| **v != 0).count();
        }
        // Kolmogorov-Smirnov bound at alpha = 0.01 on the discrete uniform CDF.
        let n = values.len() as f64;
        let mut worst: f64 = 0.0;
        for t in -20..=20 {
            let emp = values.iter().filter(|&&v| v <= t).count() as f64 / n;
            let cdf = f64::from(t + 21) / 41.0;
            worst = worst.max((emp - cdf).abs());
        }
        assert!(worst < 1.63 / n.sqrt(), "KS distance {worst}");
        assert!(values.iter().all(|v| (-20..=20).contains(v)));
        // About half the channels fire (zero draws hide ~1/41 of them).
        let rate = fired as f64 / (3.0 * draws as f64);
        assert!((rate - 0.5 * 40.0 / 41.0).abs() < 0.02, "{rate}");
    }

    #[test]
    fn channel_swap_group_properties() {
        let card = test_card(8, 8);
        let brg = [2, 0, 1];
        let once = apply_permutation(&card, brg);
        let twice = apply_permutation(&once, brg);
        assert_eq!(
            twice,
            apply_permutation(&card, compose_permutations(brg, brg))
        );
        assert_eq!(compose_permutations(brg, brg), [1, 2, 0]);
        let p = card.get_pixel(3, 5).0;
        assert_eq!(once.get_pixel(3, 5).0, [p[2], p[0], p[1]]);
        assert_eq!(twice.get_pixel(3, 5).0, [p[1], p[2], p[0]]);

        let gray = RgbImage::from_fn(8, 8, |x, y| {
            let v = (x * 30 + y) as u8;
            Rgb([v, v, v])
        });
        for perm in NON_IDENTITY_PERMUTATIONS {
            assert_eq!(apply_permutation(&gray, perm), gray);
        }
    }

    #[test]
    fn channel_swap_frequencies() {
        let mut rng = rng_from_seed(5);
        let mut counts = [0usize; 5];
        let mut swaps = 0;
        for _ in 0..12_000 {
            if let Some(p) = sample_channel_swap(&mut rng, 0.5) {
                swaps += 1;
                let i = NON_IDENTITY_PERMUTATIONS
                    .iter()
                    .position(|q| *q == p)
                    .unwrap();
                counts[i] += 1;
            }
        }
        assert!((swaps as f64 / 12_000.0 - 0.5).abs() < 0.02);
        let expected = swaps as f64 / 5.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square critical value, 4 degrees of freedom, alpha = 0.01
        assert!(chi2 < 13.277, "{chi2} {counts:?}");
    }

    #[test]
    fn degrade_contract() {
        let card = test_card(40, 30);
        assert!(degrade(&card, 1200).is_err());
        assert!(degrade(&card, 5000).is_err());
        assert!(degrade(&card, 0).is_err());
        let (out, rec) = degrade(&card, 300).unwrap();
        assert_eq!(out.dimensions(), card.dimensions());
        assert_eq!((rec.width, rec.height), (20, 15));
    }

    #[test]
    fn degrade_reduces_checkerboard_contrast_monotonically() {
        // 4-pixel cells: coarse enough to survive the mild settings, so the
        // trend is not masked by aliasing.
        let board = checkerboard(64, 64, 4);
        let area = 64 * 64;
        let variances: Vec<f64> = [0.02, 0.05, 0.1, 0.2, 0.4, 0.8]
            .iter()
            .map(|f| variance(&degrade(&board, (area as f64 * f) as u64).unwrap().0))
            .collect();
        assert!(variances.windows(2).all(|w| w[0] <= w[1]), "{variances:?}");
        assert!(*variances.last().unwrap() < variance(&board));
        // A one-pixel checkerboard is gone entirely at a quarter of the area.
        let fine = checkerboard(64, 64, 1);
        assert!(variance(&degrade(&fine, 1024).unwrap().0) < 5.0);
    }

    #[test]
    fn percentile_helper() {
        let areas: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(area_percentile(&areas, 0.3).unwrap(), 3.0);
        assert_eq!(area_percentile(&areas, 0.0).unwrap(), 1.0);
        assert_eq!(area_percentile(&areas, 1.0).unwrap(), 10.0);
        assert!(area_percentile(&[], 0.3).is_err());
    }

    #[test]
    fn occlusion_geometry_and_fill() {
        let card = test_card(50, 40);
        let cfg = AugmentConfig::default();
        let mut fractions_ok = true;
        for s in 0..10_000u64 {
            let r = sample_rect(&mut stage_rng(s, "g"), 50, 40, cfg.occlusion_size_range);
            let fw = f64::from(r.width) / 50.0;
            let fh = f64::from(r.height) / 40.0;
            // sides are rounded to whole pixels
            fractions_ok &= (0.2 - 0.5 / 40.0..=0.6 + 0.5 / 40.0).contains(&fw)
                && (0.2 - 0.5 / 40.0..=0.6 + 0.5 / 40.0).contains(&fh);
            assert!(r.x + r.width <= 50 && r.y + r.height <= 40);
        }
        assert!(fractions_ok);

        let (out, rec) = occlude(&card, &cfg, 9, &PatchSource::UniformColor).unwrap();
        let r = rec.rect;
        let OcclusionFill::Color(c) = rec.fill else {
            panic!()
        };
        let mut changed = 0;
        for (x, y, p) in out.enumerate_pixels() {
            let inside = x >= r.x && x < r.x + r.width && y >= r.y && y < r.y + r.height;
            if inside {
                assert_eq!(p.0, c);
                changed += usize::from(card.get_pixel(x, y) != p);
            } else {
                assert_eq!(p, card.get_pixel(x, y));
            }
        }
        assert!(changed as f64 > 0.9 * f64::from(r.width * r.height));

        let corpus = PatchSource::ImageCorpus(vec![sharp_card(80, 80), sharp_card(10, 10)]);
        for seed in 0..20 {
            let (_, a) = occlude(&card, &cfg, seed, &PatchSource::UniformColor).unwrap();
            let (img, b) = occlude(&card, &cfg, seed, &corpus).unwrap();
            assert_eq!(a.rect, b.rect);
            assert!(matches!(b.fill, OcclusionFill::Patch { .. }));
            assert_eq!(img.dimensions(), card.dimensions());
        }
        assert!(occlude(&card, &cfg, 1, &PatchSource::ImageCorpus(vec![])).is_err());
    }

    #[test]
    fn empty_corpus_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(PatchSource::from_dir(dir.path()).is_err());
        sharp_card(12, 12).save(dir.path().join("a.png")).unwrap();
        assert!(matches!(
            PatchSource::from_dir(dir.path()).unwrap(),
            PatchSource::ImageCorpus(v) if v.len() == 1
        ));
    }

    #[test]
    fn crop_contract() {
        let card = test_card(60, 45);
        assert!(crop(&card, 0.0, 1).is_err());
        assert!(crop(&card, 1.0, 1).is_err());
        for s in 0..10_000u64 {
            let r = sample_crop(&mut stage_rng(s, "c"), 60, 45, 0.6);
            assert!(r.x + r.width <= 60 && r.y + r.height <= 45);
        }
        let (a, ra) = crop(&card, 0.6, 42).unwrap();
        let (b, rb) = crop(&card, 0.6, 42).unwrap();
        assert_eq!((a.clone(), ra), (b, rb));
        assert_eq!(a.dimensions(), card.dimensions());
        assert_eq!((ra.width, ra.height), (46, 35));
        let (near, _) = crop(&card, 0.9999, 3).unwrap();
        assert!(mean_dev(&near, &card) < 1.0);
    }

    #[test]
    fn crop_window_is_pinned() {
        let card = test_card(64, 64);
        let (_, r) = crop(&card, 0.6, 1234).unwrap();
        assert_eq!((r.width, r.height), (50, 50));
        assert_eq!(r, crop(&card, 0.6, 1234).unwrap().1);
        assert_eq!((r.x, r.y), PINNED_CROP_ORIGIN);
    }

    const PINNED_CROP_ORIGIN: (u32, u32) = (3, 7);

    #[test]
    fn disabled_pipeline_is_near_identity() {
        let card = test_card(64, 48);
        let (out, rec) = augment_pipeline(
            &card,
            &AugmentConfig::disabled(),
            7,
            &PatchSource::UniformColor,
        )
        .unwrap();
        assert_eq!(
            rec,
            AugmentRecord {
                jpeg_quality: Some(100),
                ..AugmentRecord::default()
            }
        );
        assert!(max_dev(&out, &card) <= 3);
    }

    #[test]
    fn pipeline_replays_and_stages_are_independent() {
        let card = test_card(64, 48);
        let corpus = PatchSource::ImageCorpus(vec![sharp_card(70, 70)]);
        let all_on = AugmentConfig {
            crop_prob: 1.0,
            degrade_fraction: 1.0,
            color_cast_prob_per_channel: 1.0,
            channel_swap_prob: 1.0,
            occlusion_fraction: 1.0,
            ..AugmentConfig::default()
        };
        for seed in 0..8 {
            let (out, rec) = augment_pipeline(&card, &all_on, seed, &corpus).unwrap();
            assert_eq!(out.dimensions(), card.dimensions());
            assert_eq!(replay(&card, &rec, &corpus).unwrap(), out);
            let (again, rec2) = augment_pipeline(&card, &all_on, seed, &corpus).unwrap();
            assert_eq!((again, rec2.clone()), (out, rec.clone()));
            let json = serde_json::to_string(&rec).unwrap();
            let back: AugmentRecord = serde_json::from_str(&json).unwrap();
            assert_eq!(back, rec);

            // Turning occlusion off equals dropping it from the record.
            let no_occ = AugmentConfig {
                occlusion_fraction: 0.0,
                ..all_on.clone()
            };
            let (a, ra) = augment_pipeline(&card, &no_occ, seed, &corpus).unwrap();
            let mut stripped = rec.clone();
            stripped.occlusion = None;
            assert_eq!(ra, stripped);
            assert_eq!(a, replay(&card, &stripped, &corpus).unwrap());

            let no_crop = AugmentConfig {
                crop_prob: 0.0,
                ..all_on.clone()
            };
            let (_, rc) = augment_pipeline(&card, &no_crop, seed, &corpus).unwrap();
            let mut stripped = rec.clone();
            stripped.crop = None;
            assert_eq!(rc, stripped);
        }
    }

    #[test]
    fn occlusion_fraction_sweep_runs() {
        let card = test_card(48, 48);
        for frac in [0.0, 0.1, 0.35, 0.4, 0.5, 1.0] {
            let cfg = AugmentConfig {
                occlusion_fraction: frac,
                ..AugmentConfig::default()
            };
            let mut occluded = 0;
            for seed in 0..200 {
                let (out, rec) =
                    augment_pipeline(&card, &cfg, seed, &PatchSource::UniformColor).unwrap();
                assert_eq!(out.dimensions(), card.dimensions());
                occluded += usize::from(rec.occlusion.is_some());
            }
            let rate = occluded as f64 / 200.0;
            assert!((rate - frac).abs() <= 0.1, "{frac}: {rate}");
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let card = test_card(8, 8);
        let bad = [
            AugmentConfig {
                jpeg_quality: 0,
                ..AugmentConfig::default()
            },
            AugmentConfig {
                channel_swap_prob: 1.5,
                ..AugmentConfig::default()
            },
            AugmentConfig {
                occlusion_size_range: (0.0, 0.6),
                ..AugmentConfig::default()
            },
            AugmentConfig {
                occlusion_size_range: (0.5, 0.2),
                ..AugmentConfig::default()
            },
            AugmentConfig {
                crop_fraction: 1.0,
                ..AugmentConfig::default()
            },
        ];
        for cfg in bad {
            assert!(augment_pipeline(&card, &cfg, 0, &PatchSource::UniformColor).is_err());
        }
    }
}
