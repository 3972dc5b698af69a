//! Azimuth label space on a ring and the Von Mises class-to-class weights.
//!
//! The circle is split into `K` equal bins. Bin `b` is centered at
//! `b * 360 / K` degrees, so bin 0 straddles the 0° boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretized azimuth circle with `K` classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CircularLabelSpace {
    k: usize,
}

impl CircularLabelSpace {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::input(format!("K must be at least 2, got {k}")));
        }
        if 360 % k != 0 {
            return Err(Error::input(format!("K = {k} does not divide 360")));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bin_width_deg(&self) -> f64 {
        (360 / self.k) as f64
    }

    /// Nearest bin center; a tie between two centers goes to the lower index.
    pub fn degrees_to_bin(&self, theta: f64) -> usize {
        let x = normalize_degrees(theta) / self.bin_width_deg();
        // ceil(x - 0.5) rounds half down.
        let b = (x - 0.5).ceil() as usize;
        b % self.k
    }

    pub fn bin_to_degrees(&self, bin: usize) -> f64 {
        (bin % self.k) as f64 * self.bin_width_deg()
    }

    pub fn check_bin(&self, bin: usize) -> Result<()> {
        if bin >= self.k {
            return Err(Error::input(format!(
                "bin {bin} out of range for K = {}",
                self.k
            )));
        }
        Ok(())
    }

    /// Ring distance between two bins, in bins.
    pub fn distance(&self, a: usize, b: usize) -> Result<usize> {
        circular_distance(a, b, self.k)
    }
}

/// Maps any real angle into `[0, 360)`.
pub fn normalize_degrees(theta: f64) -> f64 {
    let r = theta.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Absolute angular difference on the circle, in `[0, 180]` degrees.
pub fn angular_difference_deg(a: f64, b: f64) -> f64 {
    // |a - b| keeps the result exactly symmetric in its arguments.
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}

/// `min(|a - b|, K - |a - b|)`.
pub fn circular_distance(a: usize, b: usize, k: usize) -> Result<usize> {
    if a >= k || b >= k {
        return Err(Error::input(format!(
            "bins ({a}, {b}) out of range for K = {k}"
        )));
    }
    let d = a.abs_diff(b);
    Ok(d.min(k - d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum KernelVariant {
    /// `exp(-d² / σ²)`, the form consistent with the reported kernel widths.
    #[default]
    SquaredDistance,
    /// `exp(-d / σ²)`, the unsquared form.
    LiteralPaper,
}

impl std::str::FromStr for KernelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" | "SquaredDistance" => Ok(KernelVariant::SquaredDistance),
            "literal" | "LiteralPaper" => Ok(KernelVariant::LiteralPaper),
            other => Err(Error::input(format!("unknown kernel variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelVariant::SquaredDistance => "squared",
            KernelVariant::LiteralPaper => "literal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    sigma: f64,
    variant: KernelVariant,
    truncation_radius: Option<usize>,
}

impl KernelConfig {
    pub fn new(
        sigma: f64,
        variant: KernelVariant,
        truncation_radius: Option<usize>,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::input(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self {
            sigma,
            variant,
            truncation_radius,
        })
    }

    /// Squared-distance kernel without truncation.
    pub fn squared(sigma: f64) -> Result<Self> {
        Self::new(sigma, KernelVariant::SquaredDistance, None)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variant(&self) -> KernelVariant {
        self.variant
    }

    pub fn truncation_radius(&self) -> Option<usize> {
        self.truncation_radius
    }

    /// Weight at ring distance `d` bins.
    pub fn weight_at_distance(&self, d: usize) -> f64 {
        if let Some(r) = self.truncation_radius {
            if d > r {
                return 0.0;
            }
        }
        let d = d as f64;
        let s2 = self.sigma * self.sigma;
        match self.variant {
            KernelVariant::SquaredDistance => (-(d * d) / s2).exp(),
            KernelVariant::LiteralPaper => (-d / s2).exp(),
        }
    }
}

/// Von Mises weight `w[l][k]` for ground-truth bin `l` and class `k`.
pub fn von_mises_weight(l: usize, k: usize, cfg: &KernelConfig, num_bins: usize) -> Result<f64> {
    let d = circular_distance(l, k, num_bins)?;
    Ok(cfg.weight_at_distance(d))
}

/// K×K class-to-class weights, row-major. Row `l` is the kernel centered at `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    k: usize,
    w: Vec<f64>,
}

impl WeightMatrix {
    /// The standard SoftMax weights: 1 on the diagonal, 0 elsewhere.
    pub fn identity(k: usize) -> Self {
        let mut w = vec![0.0; k * k];
        for i in 0..k {
            w[i * k + i] = 1.0;
        }
        Self { k, w }
    }

    pub fn von_mises(space: CircularLabelSpace, cfg: &KernelConfig) -> Self {
        let k = space.k();
        // The matrix is circulant, so one profile over distances fills every row.
        let profile: Vec<f64> = (0..=k / 2).map(|d| cfg.weight_at_distance(d)).collect();
        let mut w = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                let d = i.abs_diff(j);
                w[i * k + j] = profile[d.min(k - d)];
            }
        }
        Self { k, w }
    }

    /// Builds from explicit rows. Rows must be square, finite and non-negative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::input("weight matrix must have at least one row"));
        }
        let mut w = Vec::with_capacity(k * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::input(format!(
                    "row {i} has {} entries, expected {k}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::input(format!(
                    "row {i} has a negative or non-finite weight"
                )));
            }
            w.extend_from_slice(row);
        }
        Ok(Self { k, w })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.k..(i + 1) * self.k]
    }

    pub fn is_identity(&self) -> bool {
        (0..self.k).all(|i| (0..self.k).all(|j| self.get(i, j) == if i == j { 1.0 } else { 0.0 }))
    }
}

/// Builds the weight matrix for `space` under `cfg`.
pub fn build_weight_matrix(space: CircularLabelSpace, cfg: &KernelConfig) -> WeightMatrix {
    WeightMatrix::von_mises(space, cfg)
}
