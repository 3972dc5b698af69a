//! Weighted SoftMax cross-entropy over circular labels.
//!
//! For an example with ground-truth bin `l` and logits `z`, the loss is
//! `-Σ_k w[l][k] · log p_k` with `p = softmax(z)`. Rows of `w` are not
//! normalized, so once a row has off-diagonal mass the loss has a strictly
//! positive floor; see [`min_loss`].

use crate::circular::WeightMatrix;
use crate::error::{Error, Result};

/// Row-major `N × K` logits with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsBatch {
    k: usize,
    z: Vec<f64>,
    labels: Vec<usize>,
}

impl LogitsBatch {
    pub fn new(k: usize, z: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::input("K must be positive"));
        }
        if z.len() != labels.len() * k {
            return Err(Error::input(format!(
                "logits length {} does not match {} labels × K = {k}",
                z.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::input(format!(
                "label {bad} out of range for K = {k}"
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("logits must be finite"));
        }
        Ok(Self { k, z, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::input("logit rows have different lengths"));
        }
        Self::new(k, rows.concat(), labels)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.z[n * self.k..(n + 1) * self.k]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn logits(&self) -> &[f64] {
        &self.z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub mean: f64,
    pub per_example: Vec<f64>,
}

/// `N × K` class probabilities, one simplex point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    k: usize,
    p: Vec<f64>,
}

impl Prediction {
    /// Wraps row-major probabilities; each row must sum to 1 within 1e-9.
    pub fn new(k: usize, p: Vec<f64>) -> Result<Self> {
        if k == 0 || !p.len().is_multiple_of(k) {
            return Err(Error::input("probability matrix shape does not match K"));
        }
        for row in p.chunks_exact(k) {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::input("probability row is not on the simplex"));
            }
        }
        Ok(Self { k, p })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.p.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.p[n * self.k..(n + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.p.chunks_exact(self.k.max(1))
    }

    /// Most probable bin per row; ties go to the lower bin.
    pub fn argmax(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// `log Σ exp(z)` with max subtraction.
pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = z.iter().map(|&v| (v - m).exp()).sum();
    m + s.ln()
}

pub fn softmax_row(z: &[f64], out: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - m).exp();
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

pub fn softmax(batch: &LogitsBatch) -> Prediction {
    let k = batch.k;
    let mut p = vec![0.0; batch.z.len()];
    for (zr, pr) in batch.z.chunks_exact(k).zip(p.chunks_exact_mut(k)) {
        softmax_row(zr, pr);
    }
    Prediction { k, p }
}

fn check_dims(batch: &LogitsBatch, w: &WeightMatrix) -> Result<()> {
    if w.k() != batch.k {
        return Err(Error::input(format!(
            "weight matrix is {0}×{0} but logits have K = {1}",
            w.k(),
            batch.k
        )));
    }
    Ok(())
}

/// `-Σ_k w_k log softmax(z)_k` for one row. Zero weights contribute nothing.
pub fn weighted_row_loss(z: &[f64], weights: &[f64]) -> f64 {
    let lse = log_sum_exp(z);
    let mut s = 0.0;
    for (&zk, &wk) in z.iter().zip(weights) {
        if wk != 0.0 {
            s += wk * (zk - lse);
        }
    }
    -s
}

/// Writes `∂/∂z_j` of [`weighted_row_loss`], `(Σ_k w_k) p_j - w_j`, scaled by `scale`.
pub fn weighted_row_gradient(z: &[f64], weights: &[f64], scale: f64, out: &mut [f64]) {
    softmax_row(z, out);
    let total: f64 = weights.iter().sum();
    for (g, &wj) in out.iter_mut().zip(weights) {
        *g = (total * *g - wj) * scale;
    }
}

pub fn weighted_softmax_loss(batch: &LogitsBatch, w: &WeightMatrix) -> Result<LossValue> {
    check_dims(batch, w)?;
    let per_example: Vec<f64> = (0..batch.n())
        .map(|n| weighted_row_loss(batch.row(n), w.row(batch.labels[n])))
        .collect();
    let mean = if per_example.is_empty() {
        0.0
    } else {
        per_example.iter().sum::<f64>() / per_example.len() as f64
    };
    Ok(LossValue { mean, per_example })
}

/// Gradient of the batch-mean loss with respect to every logit, row-major `N × K`.
pub fn weighted_softmax_gradient(batch: &LogitsBatch, w: &WeightMatrix) -> Result<Vec<f64>> {
    check_dims(batch, w)?;
    let k = batch.k;
    let n = batch.n();
    let mut grad = vec![0.0; batch.z.len()];
    let scale = 1.0 / n.max(1) as f64;
    for (i, g) in grad.chunks_exact_mut(k).enumerate() {
        weighted_row_gradient(batch.row(i), w.row(batch.labels[i]), scale, g);
    }
    Ok(grad)
}

/// Plain SoftMax cross-entropy, `-log p_l` per row.
pub fn cross_entropy(batch: &LogitsBatch) -> LossValue {
    let per_example: Vec<f64> = (0..batch.n())
        .map(|n| {
            let z = batch.row(n);
            let lse = log_sum_exp(z);
            -(z[batch.labels[n]] - lse)
        })
        .collect();
    let mean = if per_example.is_empty() {
        0.0
    } else {
        per_example.iter().sum::<f64>() / per_example.len() as f64
    };
    LossValue { mean, per_example }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinLoss {
    pub p: Vec<f64>,
    pub loss: f64,
}

/// Minimizer of `-Σ_k w_k log p_k` over the simplex: `p*_k = w_k / Σ w`.
pub fn min_loss(row: &[f64]) -> Result<MinLoss> {
    if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::input("weights must be finite and non-negative"));
    }
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return Err(Error::input("weight row has no positive entry"));
    }
    let p: Vec<f64> = row.iter().map(|w| w / total).collect();
    let loss = -row
        .iter()
        .zip(&p)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, p)| w * p.ln())
        .sum::<f64>();
    Ok(MinLoss { p, loss })
}
