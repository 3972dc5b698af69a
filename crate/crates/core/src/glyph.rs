//! Rotated-glyph toy dataset.
//!
//! A fixed L-shaped polygon with a notch in its short arm is rasterized at a
//! given azimuth with 4×4 supersampling. The rotation is split into exact
//! quarter turns plus a remainder in `[0°, 90°)`, so rendering commutes with
//! 90° grid rotations bit-for-bit when noise is off.

use image::GrayImage;
use rand::distributions::{Distribution, Open01, WeightedIndex};
use rand::Rng;

use crate::circular::{normalize_degrees, CircularLabelSpace};
use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, ManifestRow, Source};
use crate::seed::{derive_seed, rng_from_seed, stage_rng};

pub const SUPERSAMPLING: usize = 4;
pub const DEFAULT_SIZE: usize = 64;
pub const DEFAULT_NOISE: f64 = 0.05;
pub const MIN_SIZE: usize = 16;

/// Outline in units of the image side, y pointing up, counterclockwise.
const OUTLINE: [(f64, f64); 10] = [
    (-0.30, -0.34),
    (0.30, -0.34),
    (0.30, -0.16),
    (0.16, -0.16),
    (0.16, -0.24),
    (0.06, -0.24),
    (0.06, -0.16),
    (-0.12, -0.16),
    (-0.12, 0.34),
    (-0.30, 0.34),
];

#[derive(Debug, Clone, PartialEq)]
pub struct GlyphImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first, values in `[0, 1]`.
    pub pixels: Vec<f64>,
    pub theta_deg: f64,
    pub seed: u64,
}

impl GlyphImage {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn to_gray8(&self) -> GrayImage {
        let buf = self
            .pixels
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer matches dimensions")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlyphOptions {
    pub size: usize,
    /// Half-width of the uniform per-pixel noise.
    pub noise: f64,
    /// Adds the glyph's 180° copy, giving the shape a two-fold symmetry.
    pub symmetric: bool,
}

impl Default for GlyphOptions {
    fn default() -> Self {
        Self {
            size: DEFAULT_SIZE,
            noise: DEFAULT_NOISE,
            symmetric: false,
        }
    }
}

fn inside_outline(x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = OUTLINE.len();
    let mut j = n - 1;
    for (i, &(xi, yi)) in OUTLINE.iter().enumerate() {
        let (xj, yj) = OUTLINE[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn inside_glyph(x: f64, y: f64, symmetric: bool) -> bool {
    inside_outline(x, y) || (symmetric && inside_outline(-x, -y))
}

/// Renders with default noise and shape.
pub fn render_glyph(theta_deg: f64, size: usize, seed: u64) -> Result<GlyphImage> {
    render_glyph_with(
        theta_deg,
        seed,
        &GlyphOptions {
            size,
            ..GlyphOptions::default()
        },
    )
}

pub fn render_glyph_with(theta_deg: f64, seed: u64, opts: &GlyphOptions) -> Result<GlyphImage> {
    let size = opts.size;
    if size < MIN_SIZE {
        return Err(Error::input(format!(
            "glyph size must be at least {MIN_SIZE}, got {size}"
        )));
    }
    if !theta_deg.is_finite() {
        return Err(Error::input("glyph angle must be finite"));
    }
    let theta = normalize_degrees(theta_deg);
    let quarter_turns = (theta / 90.0).floor() as usize % 4;
    let rem = (theta % 90.0).to_radians();
    let (sin_r, cos_r) = rem.sin_cos();

    let s = size as f64;
    let half = s / 2.0;
    let ss = SUPERSAMPLING;
    let inv_ss = 1.0 / ss as f64;
    let samples = (ss * ss) as f64;
    let mut pixels = vec![0.0; size * size];

    for py in 0..size {
        for px in 0..size {
            let mut hits = 0u32;
            for sy in 0..ss {
                // y up, centered, in units of the image side.
                let v = (half - (py as f64 + (sy as f64 + 0.5) * inv_ss)) / s;
                for sx in 0..ss {
                    let u = (px as f64 + (sx as f64 + 0.5) * inv_ss - half) / s;
                    // Undo quarter turns exactly: R(-90°)(u, v) = (v, -u).
                    let (mut a, mut b) = (u, v);
                    for _ in 0..quarter_turns {
                        (a, b) = (b, -a);
                    }
                    let x = a * cos_r + b * sin_r;
                    let y = -a * sin_r + b * cos_r;
                    if inside_glyph(x, y, opts.symmetric) {
                        hits += 1;
                    }
                }
            }
            pixels[py * size + px] = f64::from(hits) / samples;
        }
    }

    if opts.noise > 0.0 {
        let mut rng = rng_from_seed(seed);
        for p in &mut pixels {
            let n: f64 = rng.gen_range(-opts.noise..=opts.noise);
            *p = (*p + n).clamp(0.0, 1.0);
        }
    }

    Ok(GlyphImage {
        width: size,
        height: size,
        pixels,
        theta_deg,
        seed,
    })
}

/// How labels are assigned to generated samples.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelDistribution {
    /// Exact per-bin counts (stratified); must sum to `n`.
    Counts(Vec<usize>),
    /// Per-bin sampling weights; labels drawn independently.
    Weights(Vec<f64>),
}

impl LabelDistribution {
    pub fn uniform_counts(n: usize, k: usize) -> Self {
        let base = n / k;
        let extra = n % k;
        Self::Counts((0..k).map(|b| base + usize::from(b < extra)).collect())
    }

    /// Flat weight `1` everywhere plus `peak_weight` on each listed bin.
    pub fn peaked(k: usize, peaks: &[usize], peak_weight: f64) -> Self {
        let mut w = vec![1.0; k];
        for &p in peaks {
            w[p % k] += peak_weight;
        }
        Self::Weights(w)
    }

    fn len(&self) -> usize {
        match self {
            Self::Counts(c) => c.len(),
            Self::Weights(w) => w.len(),
        }
    }
}

/// Draws `n` glyph samples with labels following `dist` over `space`'s bins.
///
/// Each sample's angle is spread uniformly over the open interval of its bin;
/// each sample's render seed is derived from `seed` and its index.
pub fn make_glyph_dataset(
    n: usize,
    dist: &LabelDistribution,
    space: CircularLabelSpace,
    seed: u64,
) -> Result<DatasetManifest> {
    if dist.len() == 0 {
        return Err(Error::input("label distribution is empty"));
    }
    if dist.len() != space.k() {
        return Err(Error::input(format!(
            "label distribution has {} bins, label space has {}",
            dist.len(),
            space.k()
        )));
    }
    let mut rng = stage_rng(seed, "glyph-dataset");
    let bins: Vec<usize> = match dist {
        LabelDistribution::Counts(c) => {
            let total: usize = c.iter().sum();
            if total != n {
                return Err(Error::input(format!(
                    "bin counts sum to {total}, expected {n}"
                )));
            }
            c.iter()
                .enumerate()
                .flat_map(|(b, &m)| std::iter::repeat_n(b, m))
                .collect()
        }
        LabelDistribution::Weights(w) => {
            if n == 0 {
                Vec::new()
            } else {
                let idx = WeightedIndex::new(w)
                    .map_err(|e| Error::input(format!("invalid label weights: {e}")))?;
                (0..n).map(|_| idx.sample(&mut rng)).collect()
            }
        }
    };

    let width = space.bin_width_deg();
    let rows = bins
        .into_iter()
        .enumerate()
        .map(|(i, bin)| {
            let center = space.bin_to_degrees(bin);
            let theta = loop {
                let u: f64 = Open01.sample(&mut rng);
                let t = normalize_degrees(center + (u - 0.5) * width);
                if space.degrees_to_bin(t) == bin {
                    break t;
                }
            };
            ManifestRow {
                sample_id: format!("g{i:06}"),
                source: Source::Glyph,
                path_or_theta: format!("{theta}"),
                seed: derive_seed(seed, &format!("glyph/{i}")),
                azimuth_deg: theta,
                azimuth_bin: bin,
            }
        })
        .collect();
    Ok(DatasetManifest::new(rows))
}
