//! Seeded mini-batch SGD for a flattened-pixel classifier.
//!
//! Architecture: pixels → optional ReLU hidden layer → `K` logits, trained
//! with plain SGD on the weighted SoftMax loss. The identity weight matrix
//! gives ordinary SoftMax training; nothing else differs between the two.
//!
//! Randomness comes from [`crate::seed`] stages derived from `TrainConfig::seed`:
//! `select/real` and `select/synth` pick the training subset, `init` draws the
//! Glorot-uniform weights and `shuffle` orders each epoch.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::circular::{build_weight_matrix, CircularLabelSpace, KernelConfig, WeightMatrix};
use crate::error::{Error, Result};
use crate::glyph::{render_glyph, DEFAULT_SIZE};
use crate::loss::{argmax, softmax_row, weighted_row_gradient, weighted_row_loss, Prediction};
use crate::manifest::{DatasetManifest, ManifestRow};
use crate::metrics::median_angular_error;
use crate::seed::{shuffle, stage_rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// Standard SoftMax cross-entropy (identity weights).
    SoftMax,
    /// Von Mises weighted SoftMax.
    Weighted(KernelConfig),
}

impl LossKind {
    pub fn weight_matrix(&self, space: CircularLabelSpace) -> WeightMatrix {
        match self {
            LossKind::SoftMax => WeightMatrix::identity(space.k()),
            LossKind::Weighted(cfg) => build_weight_matrix(space, cfg),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_units: usize,
    /// Fraction of the training set drawn from the synthetic pool.
    pub blend_ratio: f64,
    /// Total training samples; `None` takes as many as the pools allow.
    pub train_size: Option<usize>,
    /// Side length of the square input images.
    pub image_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 36,
            loss: LossKind::SoftMax,
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 16,
            seed: 0,
            hidden_units: 0,
            blend_ratio: 0.0,
            train_size: None,
            image_size: DEFAULT_SIZE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<CircularLabelSpace> {
        let space = CircularLabelSpace::new(self.k)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::input("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::input("batch_size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.blend_ratio) {
            return Err(Error::input("blend_ratio must be in [0, 1]"));
        }
        if self.image_size == 0 {
            return Err(Error::input("image_size must be positive"));
        }
        Ok(space)
    }
}

/// Flattened grayscale inputs with their labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    pub dim: usize,
    pub x: Vec<f64>,
    pub labels: Vec<usize>,
    pub azimuth_deg: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, input: &[f64], label: usize, azimuth_deg: f64) -> Result<()> {
        if self.labels.is_empty() && self.dim == 0 {
            self.dim = input.len();
        }
        if input.len() != self.dim {
            return Err(Error::input(format!(
                "input has {} values, expected {}",
                input.len(),
                self.dim
            )));
        }
        self.x.extend_from_slice(input);
        self.labels.push(label);
        self.azimuth_deg.push(azimuth_deg);
        Ok(())
    }

    /// Renders glyph rows and reads image rows (8-bit grayscale, `size × size`).
    pub fn from_manifest(manifest: &DatasetManifest, size: usize) -> Result<Self> {
        Self::from_rows(manifest, manifest.rows.iter(), size)
    }

    fn from_rows<'a>(
        manifest: &DatasetManifest,
        rows: impl Iterator<Item = &'a ManifestRow>,
        size: usize,
    ) -> Result<Self> {
        let mut s = Samples {
            dim: size * size,
            ..Samples::default()
        };
        for row in rows {
            let input = match row.glyph_theta().filter(|_| row.is_rendered_glyph()) {
                Some(theta) => render_glyph(theta, size, row.seed)?.pixels,
                None => load_gray(&manifest.resolve_path(row), size)?,
            };
            s.push(&input, row.azimuth_bin, row.azimuth_deg)?;
        }
        Ok(s)
    }
}

fn load_gray(path: &Path, size: usize) -> Result<Vec<f64>> {
    let img = image::open(path)
        .map_err(|e| Error::input(format!("reading {}: {e}", path.display())))?
        .to_luma8();
    if img.width() as usize != size || img.height() as usize != size {
        return Err(Error::input(format!(
            "{} is {}×{}, expected {size}×{size}",
            path.display(),
            img.width(),
            img.height()
        )));
    }
    Ok(img.pixels().map(|p| f64::from(p.0[0]) / 255.0).collect())
}

/// Dot product with four fixed-order partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut d = Self::zeros(inputs, outputs);
        for w in &mut d.weights {
            *w = rng.gen_range(-a..=a);
        }
        d
    }

    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().enumerate() {
            *v = self.bias[o] + dot(self.row(o), x);
        }
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub k: usize,
    pub input_dim: usize,
    pub hidden_units: usize,
    pub layers: Vec<Dense>,
}

const MAGIC: &[u8; 4] = b"VPMP";
const FORMAT_VERSION: u16 = 1;

/// Per-sample scratch buffers.
struct Scratch {
    hidden: Vec<f64>,
    logits: Vec<f64>,
    dlogits: Vec<f64>,
    dhidden: Vec<f64>,
}

impl ModelParams {
    /// All-zero parameters; predicts the uniform distribution.
    pub fn zeros(input_dim: usize, hidden_units: usize, k: usize) -> Self {
        let layers = if hidden_units == 0 {
            vec![Dense::zeros(input_dim, k)]
        } else {
            vec![
                Dense::zeros(input_dim, hidden_units),
                Dense::zeros(hidden_units, k),
            ]
        };
        Self {
            k,
            input_dim,
            hidden_units,
            layers,
        }
    }

    /// Glorot-uniform weights and zero biases.
    pub fn init<R: Rng>(input_dim: usize, hidden_units: usize, k: usize, rng: &mut R) -> Self {
        let layers = if hidden_units == 0 {
            vec![Dense::glorot(input_dim, k, rng)]
        } else {
            vec![
                Dense::glorot(input_dim, hidden_units, rng),
                Dense::glorot(hidden_units, k, rng),
            ]
        };
        Self {
            k,
            input_dim,
            hidden_units,
            layers,
        }
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            hidden: vec![0.0; self.hidden_units],
            logits: vec![0.0; self.k],
            dlogits: vec![0.0; self.k],
            dhidden: vec![0.0; self.hidden_units],
        }
    }

    fn forward_into(&self, x: &[f64], s: &mut Scratch) {
        if self.hidden_units == 0 {
            self.layers[0].forward(x, &mut s.logits);
        } else {
            self.layers[0].forward(x, &mut s.hidden);
            for h in &mut s.hidden {
                *h = h.max(0.0);
            }
            self.layers[1].forward(&s.hidden, &mut s.logits);
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::input(format!(
                "input has {} values, model expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut s = self.scratch();
        self.forward_into(x, &mut s);
        Ok(s.logits)
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }

    /// One SGD step on the batch-mean loss; returns the per-example losses and
    /// argmax predictions computed before the update.
    pub fn sgd_step(
        &mut self,
        samples: &Samples,
        batch: &[usize],
        weights: &WeightMatrix,
        learning_rate: f64,
    ) -> (Vec<f64>, Vec<usize>) {
        let mut grads: Vec<Dense> = self
            .layers
            .iter()
            .map(|l| Dense::zeros(l.inputs, l.outputs))
            .collect();
        let mut s = self.scratch();
        let scale = 1.0 / batch.len() as f64;
        let mut losses = Vec::with_capacity(batch.len());
        let mut preds = Vec::with_capacity(batch.len());
        for &i in batch {
            let x = samples.input(i);
            let wrow = weights.row(samples.labels[i]);
            self.forward_into(x, &mut s);
            losses.push(weighted_row_loss(&s.logits, wrow));
            preds.push(argmax(&s.logits));
            weighted_row_gradient(&s.logits, wrow, scale, &mut s.dlogits);

            let (top, top_in): (usize, &[f64]) = if self.hidden_units == 0 {
                (0, x)
            } else {
                (1, &s.hidden)
            };
            let g = &mut grads[top];
            for (o, &d) in s.dlogits.iter().enumerate() {
                g.bias[o] += d;
                axpy(d, top_in, &mut g.weights[o * g.inputs..(o + 1) * g.inputs]);
            }
            if self.hidden_units > 0 {
                s.dhidden.iter_mut().for_each(|v| *v = 0.0);
                for (o, &d) in s.dlogits.iter().enumerate() {
                    axpy(d, self.layers[1].row(o), &mut s.dhidden);
                }
                let g = &mut grads[0];
                for (h, &d) in s.dhidden.iter().enumerate() {
                    if s.hidden[h] > 0.0 {
                        g.bias[h] += d;
                        axpy(d, x, &mut g.weights[h * g.inputs..(h + 1) * g.inputs]);
                    }
                }
            }
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads) {
            axpy(-learning_rate, &g.weights, &mut layer.weights);
            axpy(-learning_rate, &g.bias, &mut layer.bias);
        }
        (losses, preds)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n: usize = self
            .layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum();
        let mut out = Vec::with_capacity(16 + 8 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.k as u16).to_le_bytes());
        out.extend_from_slice(&(self.input_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.hidden_units as u32).to_le_bytes());
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(Error::input("not a model parameter file"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::input(format!(
                "unsupported parameter file version {version}"
            )));
        }
        let k = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let input_dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let hidden = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let mut params = Self::zeros(input_dim, hidden, k);
        let expected: usize = params
            .layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum();
        let body = &bytes[16..];
        if body.len() != expected * 8 {
            return Err(Error::input(format!(
                "parameter file body is {} bytes, expected {}",
                body.len(),
                expected * 8
            )));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for l in &mut params.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = values.next().expect("length checked");
            }
        }
        if !params.is_finite() {
            return Err(Error::input("parameter file contains non-finite values"));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training loss over the epoch's mini-batches.
    pub loss: f64,
    /// Median angular error of the in-epoch predictions, in degrees.
    pub train_mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
    /// Number of (real, synthetic) samples used.
    pub drawn: (usize, usize),
}

pub fn log_to_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,loss,train_MAE\n");
    for e in log {
        let _ = writeln!(s, "{},{},{}", e.epoch, e.loss, e.train_mae);
    }
    s
}

/// `ceil(blend · n)`, ignoring floating-point excess below 1e-9.
pub fn synthetic_count(blend_ratio: f64, n: usize) -> usize {
    let x = blend_ratio * n as f64;
    let c = (x - 1e-9).ceil().max(0.0) as usize;
    c.min(n)
}

/// Largest total size whose blend split fits in both pools.
fn max_train_size(blend: f64, real: usize, synth: usize) -> usize {
    let mut n = real + synth;
    while n > 0 {
        let s = synthetic_count(blend, n);
        if s <= synth && n - s <= real {
            return n;
        }
        n -= 1;
    }
    0
}

fn draw(pool: usize, count: usize, root: u64, stage: &str) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pool).collect();
    shuffle(&mut idx, &mut stage_rng(root, stage));
    idx.truncate(count);
    idx
}

/// Trains from manifests, rendering or loading only the samples drawn.
pub fn train(
    real: &DatasetManifest,
    synth: &DatasetManifest,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let space = cfg.validate()?;
    let (ri, si) = select(real.len(), synth.len(), cfg)?;
    let mut samples = Samples::from_rows(real, ri.iter().map(|&i| &real.rows[i]), cfg.image_size)?;
    let synth_samples =
        Samples::from_rows(synth, si.iter().map(|&i| &synth.rows[i]), cfg.image_size)?;
    for i in 0..synth_samples.len() {
        samples.push(
            synth_samples.input(i),
            synth_samples.labels[i],
            synth_samples.azimuth_deg[i],
        )?;
    }
    for &l in &samples.labels {
        space.check_bin(l)?;
    }
    let mut out = fit(&samples, cfg)?;
    out.drawn = (ri.len(), si.len());
    Ok(out)
}

/// Indices drawn from the real and synthetic pools for `cfg`.
pub fn select(real: usize, synth: usize, cfg: &TrainConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = match cfg.train_size {
        Some(n) => n,
        None => max_train_size(cfg.blend_ratio, real, synth),
    };
    if n == 0 {
        return Err(Error::input(format!(
            "no training samples available for blend ratio {} (real pool {real}, synthetic pool {synth})",
            cfg.blend_ratio
        )));
    }
    let n_synth = synthetic_count(cfg.blend_ratio, n);
    let n_real = n - n_synth;
    if n_synth > synth {
        return Err(Error::input(format!(
            "synthetic pool has {synth} samples, {n_synth} requested"
        )));
    }
    if n_real > real {
        return Err(Error::input(format!(
            "real pool has {real} samples, {n_real} requested"
        )));
    }
    Ok((
        draw(real, n_real, cfg.seed, "select/real"),
        draw(synth, n_synth, cfg.seed, "select/synth"),
    ))
}

/// Trains on already-loaded samples using every one of them.
pub fn fit(samples: &Samples, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let space = cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    let weights = cfg.loss.weight_matrix(space);
    let mut params = ModelParams::init(
        samples.dim,
        cfg.hidden_units,
        cfg.k,
        &mut stage_rng(cfg.seed, "init"),
    );
    let mut rng = stage_rng(cfg.seed, "shuffle");
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        shuffle(&mut order, &mut rng);
        let mut loss_sum = 0.0;
        let mut pred_deg = Vec::with_capacity(order.len());
        let mut gt_deg = Vec::with_capacity(order.len());
        for batch in order.chunks(cfg.batch_size) {
            let (losses, preds) = params.sgd_step(samples, batch, &weights, cfg.learning_rate);
            let batch_loss: f64 = losses.iter().sum();
            if !batch_loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: "non-finite loss".into(),
                });
            }
            if !params.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: "non-finite parameters after update".into(),
                });
            }
            loss_sum += batch_loss;
            for (&i, &p) in batch.iter().zip(&preds) {
                pred_deg.push(space.bin_to_degrees(p));
                gt_deg.push(samples.azimuth_deg[i]);
            }
        }
        log.push(EpochLog {
            epoch,
            loss: loss_sum / samples.len() as f64,
            train_mae: median_angular_error(&pred_deg, &gt_deg)?,
        });
    }
    Ok(TrainOutcome {
        params,
        log,
        drawn: (0, 0),
    })
}

/// Class probabilities and argmax bins (ties to the lower bin) for every sample.
pub fn predict(params: &ModelParams, samples: &Samples) -> Result<(Prediction, Vec<usize>)> {
    if !samples.is_empty() && samples.dim != params.input_dim {
        return Err(Error::input(format!(
            "samples have {} inputs, model expects {}",
            samples.dim, params.input_dim
        )));
    }
    let mut p = vec![0.0; samples.len() * params.k];
    let mut s = params.scratch();
    for (i, out) in p.chunks_exact_mut(params.k.max(1)).enumerate() {
        params.forward_into(samples.input(i), &mut s);
        softmax_row(&s.logits, out);
    }
    let pred = Prediction::new(params.k, p)?;
    let bins = pred.argmax();
    Ok((pred, bins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyph::{make_glyph_dataset, LabelDistribution};
    use crate::loss::{cross_entropy, LogitsBatch};
    use crate::seed::rng_from_seed;

    fn random_samples(n: usize, dim: usize, k: usize, seed: u64) -> Samples {
        let mut rng = rng_from_seed(seed);
        let mut s = Samples::default();
        for _ in 0..n {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
            let l = rng.gen_range(0..k as u32) as usize;
            s.push(&x, l, l as f64 * 360.0 / k as f64).unwrap();
        }
        s
    }

    fn glyph_samples(n: usize, k: usize, size: usize, seed: u64) -> Samples {
        let space = CircularLabelSpace::new(k).unwrap();
        let m =
            make_glyph_dataset(n, &LabelDistribution::uniform_counts(n, k), space, seed).unwrap();
        Samples::from_manifest(&m, size).unwrap()
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..13).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..13).map(|i| 1.0 - i as f64 * 0.1).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn zero_model_predicts_uniform() {
        let s = random_samples(5, 8, 4, 1);
        let params = ModelParams::zeros(8, 0, 4);
        let (p, bins) = predict(&params, &s).unwrap();
        for r in p.rows() {
            assert!(r.iter().all(|&v| v == 0.25));
        }
        assert_eq!(bins, vec![0; 5]);
        let wrong = random_samples(2, 9, 4, 1);
        assert!(predict(&params, &wrong).is_err());
    }

    #[test]
    fn predictions_ignore_batch_order() {
        let s = random_samples(6, 10, 4, 2);
        let params = ModelParams::init(10, 5, 4, &mut rng_from_seed(9));
        let (p, _) = predict(&params, &s).unwrap();
        let mut rev = Samples::default();
        for i in (0..6).rev() {
            rev.push(s.input(i), s.labels[i], s.azimuth_deg[i]).unwrap();
        }
        let (q, _) = predict(&params, &rev).unwrap();
        for i in 0..6 {
            assert_eq!(p.row(i), q.row(5 - i));
        }
    }

    #[test]
    fn single_step_reduces_example_loss() {
        let space = CircularLabelSpace::new(12).unwrap();
        for trial in 0..50u64 {
            let s = random_samples(1, 20, 12, 100 + trial);
            let hidden = if trial % 2 == 0 { 0 } else { 6 };
            let kernel = if trial % 3 == 0 {
                LossKind::SoftMax
            } else {
                LossKind::Weighted(KernelConfig::squared(1.0 + (trial % 4) as f64).unwrap())
            };
            let w = kernel.weight_matrix(space);
            let mut params = ModelParams::init(20, hidden, 12, &mut rng_from_seed(trial));
            let before = weighted_row_loss(&params.logits(s.input(0)).unwrap(), w.row(s.labels[0]));
            params.sgd_step(&s, &[0], &w, 1e-4);
            let after = weighted_row_loss(&params.logits(s.input(0)).unwrap(), w.row(s.labels[0]));
            assert!(after < before, "trial {trial}: {after} >= {before}");
        }
    }

    /// Independent plain cross-entropy trainer for a linear model.
    fn reference_softmax_trainer(samples: &Samples, cfg: &TrainConfig) -> Vec<f64> {
        let k = cfg.k;
        let d = samples.dim;
        let init = ModelParams::init(d, 0, k, &mut stage_rng(cfg.seed, "init"));
        let mut w = init.layers[0].weights.clone();
        let mut b = vec![0.0; k];
        let mut rng = stage_rng(cfg.seed, "shuffle");
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut curve = Vec::new();
        for _ in 0..cfg.epochs {
            shuffle(&mut order, &mut rng);
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let mut gw = vec![0.0; k * d];
                let mut gb = vec![0.0; k];
                for &i in batch {
                    let x = samples.input(i);
                    let z: Vec<f64> = (0..k)
                        .map(|c| b[c] + (0..d).map(|j| w[c * d + j] * x[j]).sum::<f64>())
                        .collect();
                    let lb = LogitsBatch::new(k, z.clone(), vec![samples.labels[i]]).unwrap();
                    total += cross_entropy(&lb).mean;
                    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
                    let sum: f64 = e.iter().sum();
                    for c in 0..k {
                        let g = (e[c] / sum - if c == samples.labels[i] { 1.0 } else { 0.0 })
                            / batch.len() as f64;
                        gb[c] += g;
                        for j in 0..d {
                            gw[c * d + j] += g * x[j];
                        }
                    }
                }
                for (wv, g) in w.iter_mut().zip(&gw) {
                    *wv -= cfg.learning_rate * g;
                }
                for (bv, g) in b.iter_mut().zip(&gb) {
                    *bv -= cfg.learning_rate * g;
                }
            }
            curve.push(total / samples.len() as f64);
        }
        curve
    }

    #[test]
    fn softmax_training_matches_reference_trainer() {
        let s = random_samples(60, 16, 4, 5);
        let cfg = TrainConfig {
            k: 4,
            loss: LossKind::SoftMax,
            learning_rate: 0.3,
            epochs: 8,
            batch_size: 7,
            seed: 21,
            ..TrainConfig::default()
        };
        let out = fit(&s, &cfg).unwrap();
        let reference = reference_softmax_trainer(&s, &cfg);
        for (e, r) in out.log.iter().zip(&reference) {
            assert!(
                (e.loss - r).abs() < 1e-9 * r.abs().max(1.0),
                "{} vs {r}",
                e.loss
            );
        }
    }

    #[test]
    fn weighted_and_plain_runs_share_everything_but_weights() {
        let s = random_samples(30, 8, 12, 8);
        let base = TrainConfig {
            k: 12,
            epochs: 2,
            batch_size: 5,
            seed: 4,
            ..TrainConfig::default()
        };
        // A zero-radius kernel is the identity matrix, so the runs must coincide.
        let truncated = TrainConfig {
            loss: LossKind::Weighted(
                KernelConfig::new(
                    2.0,
                    crate::circular::KernelVariant::SquaredDistance,
                    Some(0),
                )
                .unwrap(),
            ),
            ..base.clone()
        };
        assert_eq!(fit(&s, &base).unwrap(), fit(&s, &truncated).unwrap());
        let wide = TrainConfig {
            loss: LossKind::Weighted(KernelConfig::squared(2.0).unwrap()),
            ..base.clone()
        };
        assert_ne!(
            fit(&s, &base).unwrap().params,
            fit(&s, &wide).unwrap().params
        );
    }

    #[test]
    fn training_is_deterministic_and_round_trips() {
        let s = random_samples(40, 12, 4, 3);
        let cfg = TrainConfig {
            k: 4,
            hidden_units: 5,
            epochs: 3,
            batch_size: 8,
            seed: 77,
            ..TrainConfig::default()
        };
        let a = fit(&s, &cfg).unwrap();
        let b = fit(&s, &cfg).unwrap();
        assert_eq!(a.params.to_bytes(), b.params.to_bytes());
        let bytes = a.params.to_bytes();
        assert_eq!(&bytes[..4], b"VPMP");
        assert_eq!(bytes.len(), 16 + 8 * (12 * 5 + 5 + 5 * 4 + 4));
        let back = ModelParams::from_bytes(&bytes).unwrap();
        assert_eq!(back, a.params);
        assert!(ModelParams::from_bytes(&bytes[..20]).is_err());
        assert!(ModelParams::from_bytes(b"nope").is_err());
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let mut s = random_samples(10, 4, 4, 1);
        for v in &mut s.x {
            *v *= 1e200;
        }
        let cfg = TrainConfig {
            k: 4,
            learning_rate: 1e200,
            epochs: 3,
            ..TrainConfig::default()
        };
        match fit(&s, &cfg) {
            Err(Error::Divergence { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn blend_boundaries_and_pool_errors() {
        let cfg = TrainConfig {
            blend_ratio: 0.0,
            ..TrainConfig::default()
        };
        let (r, s) = select(10, 7, &cfg).unwrap();
        assert_eq!((r.len(), s.len()), (10, 0));
        let cfg = TrainConfig {
            blend_ratio: 1.0,
            ..TrainConfig::default()
        };
        let (r, s) = select(10, 7, &cfg).unwrap();
        assert_eq!((r.len(), s.len()), (0, 7));
        assert!(select(10, 0, &cfg).is_err());
        let cfg = TrainConfig {
            blend_ratio: 0.25,
            train_size: Some(8),
            ..TrainConfig::default()
        };
        let (r, s) = select(10, 7, &cfg).unwrap();
        assert_eq!((r.len(), s.len()), (6, 2));
        let cfg = TrainConfig {
            blend_ratio: 0.5,
            train_size: Some(20),
            ..TrainConfig::default()
        };
        assert!(select(10, 7, &cfg).is_err());
        assert_eq!(synthetic_count(0.35, 100), 35);
        assert_eq!(synthetic_count(0.3, 10), 3);
        assert_eq!(synthetic_count(0.31, 10), 4);
    }

    #[test]
    fn separable_four_bins_are_learned() {
        let k = 4;
        let s = glyph_samples(200, k, 32, 12);
        let cfg = TrainConfig {
            k,
            epochs: 50,
            batch_size: 10,
            learning_rate: 0.05,
            seed: 1,
            image_size: 32,
            ..TrainConfig::default()
        };
        let out = fit(&s, &cfg).unwrap();
        let (_, bins) = predict(&out.params, &s).unwrap();
        let correct = bins.iter().zip(&s.labels).filter(|(a, b)| a == b).count();
        assert!(correct as f64 / s.len() as f64 >= 0.95, "{correct}/200");
    }

    #[test]
    fn log_csv_has_expected_header() {
        let csv = log_to_csv(&[EpochLog {
            epoch: 1,
            loss: 0.5,
            train_mae: 12.0,
        }]);
        assert_eq!(csv, "epoch,loss,train_MAE\n1,0.5,12\n");
    }
}
