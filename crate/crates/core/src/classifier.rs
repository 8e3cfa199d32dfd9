//! Pixel classifier with a hard receptive-field bound.
//!
//! Each pixel is described by statistics of the `(2r + 1)²` window centered
//! on it (clipped at the frame): per channel the center value, mean, standard
//! deviation, minimum and maximum, all divided by 255. A linear layer maps
//! those features to three scores and a softmax turns them into class
//! probabilities. Nothing outside the window can influence a pixel's output.
//!
//! Training is full-batch gradient descent on the mean per-channel soft
//! Jaccard loss over a seeded subsample of crop pixels. Features are
//! standardized during training and the scaling is folded back into the
//! stored weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{grad_from_sums, DEFAULT_EPSILON};
use crate::raster::{argmax_labels, IntensityRaster, LabelMap, ProbabilityMap, NUM_CLASSES};
use crate::tiling::{pad_to_multiple, unpad_labels, Crop};

pub const FEATURE_RECIPE: &str = "window-stats-v1";
pub const FEATURES_PER_CHANNEL: usize = 5;
pub const DEFAULT_RADIUS: usize = 5;

/// Samples per parallel chunk in the gradient reduction. Fixed so the
/// summation order, and therefore the result, never depends on thread count.
const CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalWindowClassifier {
    pub radius: usize,
    pub channels: usize,
    pub feature_recipe: String,
    /// `NUM_CLASSES` rows of `features + 1` values; the last column is the bias.
    pub weights: Vec<f64>,
    pub trained: bool,
    pub trained_on_preprocessed: bool,
    pub seed: u64,
}

impl LocalWindowClassifier {
    /// Untrained model with all-zero weights.
    pub fn new(radius: usize, channels: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::InvalidParameter("radius must be at least 1".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!("unsupported channel count {channels}")));
        }
        Ok(Self {
            radius,
            channels,
            feature_recipe: FEATURE_RECIPE.to_string(),
            weights: vec![0.0; NUM_CLASSES * (channels * FEATURES_PER_CHANNEL + 1)],
            trained: false,
            trained_on_preprocessed: false,
            seed: 0,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.channels * FEATURES_PER_CHANNEL
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_recipe != FEATURE_RECIPE {
            return Err(Error::InvalidParameter(format!("unknown feature recipe `{}`", self.feature_recipe)));
        }
        if self.radius == 0 {
            return Err(Error::InvalidParameter("radius must be at least 1".into()));
        }
        if self.weights.len() != NUM_CLASSES * (self.feature_count() + 1) {
            return Err(Error::InvalidParameter(format!(
                "expected {} weights, got {}",
                NUM_CLASSES * (self.feature_count() + 1),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("non-finite weight".into()));
        }
        Ok(())
    }

    fn check_image(&self, img: &IntensityRaster) -> Result<()> {
        if img.channels() != self.channels {
            return Err(Error::InvalidParameter(format!(
                "model expects {} channels, image has {}",
                self.channels,
                img.channels()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Features of one pixel, computed directly from the window.
pub fn extract_features(img: &IntensityRaster, x: usize, y: usize, radius: usize) -> Vec<f64> {
    let (w, h) = img.dims();
    let (x0, x1) = (x.saturating_sub(radius), (x + radius).min(w - 1));
    let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(h - 1));
    let mut out = Vec::with_capacity(img.channels() * FEATURES_PER_CHANNEL);
    for c in 0..img.channels() {
        let (mut sum, mut sum_sq, mut lo, mut hi) = (0u64, 0u64, u8::MAX, u8::MIN);
        for yy in y0..=y1 {
            for xx in x0..=x1 {
                let v = img.get(xx, yy, c);
                sum += v as u64;
                sum_sq += (v as u64).pow(2);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let count = ((x1 - x0 + 1) * (y1 - y0 + 1)) as u64;
        out.extend(window_stats(img.get(x, y, c), sum, sum_sq, count, lo, hi));
    }
    out
}

fn window_stats(center: u8, sum: u64, sum_sq: u64, count: u64, lo: u8, hi: u8) -> [f64; FEATURES_PER_CHANNEL] {
    let n = count as f64;
    // count² · variance, exactly.
    let scaled_var = (count as u128 * sum_sq as u128 - (sum as u128).pow(2)) as f64;
    [
        center as f64 / 255.0,
        sum as f64 / n / 255.0,
        scaled_var.sqrt() / n / 255.0,
        lo as f64 / 255.0,
        hi as f64 / 255.0,
    ]
}

/// Sliding extremum over `[i - r, i + r]` clipped to the slice.
fn sliding<F: Fn(u8, u8) -> u8>(src: &[u8], r: usize, pick: F, dst: &mut [u8]) {
    let n = src.len();
    for i in 0..n {
        let (a, b) = (i.saturating_sub(r), (i + r).min(n - 1));
        dst[i] = src[a..=b].iter().copied().reduce(&pick).unwrap();
    }
}

fn window_extremum(plane: &[u8], w: usize, h: usize, r: usize, pick: fn(u8, u8) -> u8) -> Vec<u8> {
    let mut rows = vec![0u8; w * h];
    for y in 0..h {
        sliding(&plane[y * w..(y + 1) * w], r, pick, &mut rows[y * w..(y + 1) * w]);
    }
    let mut out = vec![0u8; w * h];
    let mut col = vec![0u8; h];
    let mut col_out = vec![0u8; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        sliding(&col, r, pick, &mut col_out);
        for y in 0..h {
            out[y * w + x] = col_out[y];
        }
    }
    out
}

/// Summed-area table with one row and column of leading zeros.
fn integral(plane: &[u8], w: usize, h: usize, square: bool) -> Vec<u64> {
    let stride = w + 1;
    let mut table = vec![0u64; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0u64;
        for x in 0..w {
            let v = plane[y * w + x] as u64;
            row += if square { v * v } else { v };
            table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
        }
    }
    table
}

/// Features for every pixel, row-major, `feature_count` values per pixel.
/// Equal to [`extract_features`] at each pixel, bit for bit.
pub fn feature_map(img: &IntensityRaster, radius: usize) -> Vec<f64> {
    let (w, h) = img.dims();
    let per_pixel = img.channels() * FEATURES_PER_CHANNEL;
    let mut out = vec![0.0; w * h * per_pixel];
    for c in 0..img.channels() {
        let plane = img.plane(c);
        let sums = integral(plane, w, h, false);
        let squares = integral(plane, w, h, true);
        let lows = window_extremum(plane, w, h, radius, u8::min);
        let highs = window_extremum(plane, w, h, radius, u8::max);
        let stride = w + 1;
        let rect = |t: &[u64], x0: usize, y0: usize, x1: usize, y1: usize| {
            t[(y1 + 1) * stride + x1 + 1] + t[y0 * stride + x0] - t[y0 * stride + x1 + 1] - t[(y1 + 1) * stride + x0]
        };
        out.par_chunks_mut(w * per_pixel).enumerate().for_each(|(y, row)| {
            let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(h - 1));
            for x in 0..w {
                let (x0, x1) = (x.saturating_sub(radius), (x + radius).min(w - 1));
                let count = ((x1 - x0 + 1) * (y1 - y0 + 1)) as u64;
                let i = y * w + x;
                let stats = window_stats(
                    plane[i],
                    rect(&sums, x0, y0, x1, y1),
                    rect(&squares, x0, y0, x1, y1),
                    count,
                    lows[i],
                    highs[i],
                );
                let base = x * per_pixel + c * FEATURES_PER_CHANNEL;
                row[base..base + FEATURES_PER_CHANNEL].copy_from_slice(&stats);
            }
        });
    }
    out
}

/// Softmax of the linear scores of one feature vector.
fn class_probabilities(weights: &[f64], features: &[f64]) -> [f64; NUM_CLASSES] {
    let stride = features.len() + 1;
    let mut scores = [0.0; NUM_CLASSES];
    for (k, s) in scores.iter_mut().enumerate() {
        let row = &weights[k * stride..(k + 1) * stride];
        *s = row[features.len()] + row.iter().zip(features).map(|(w, f)| w * f).sum::<f64>();
    }
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - top).exp();
        total += *s;
    }
    scores.map(|e| e / total)
}

pub fn predict(clf: &LocalWindowClassifier, img: &IntensityRaster) -> Result<ProbabilityMap> {
    clf.validate()?;
    clf.check_image(img)?;
    if !clf.trained {
        log_untrained();
    }
    let (w, h) = img.dims();
    let n = w * h;
    let per_pixel = clf.feature_count();
    let features = feature_map(img, clf.radius);
    let rows: Vec<Vec<[f64; NUM_CLASSES]>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let i = y * w + x;
                    class_probabilities(&clf.weights, &features[i * per_pixel..(i + 1) * per_pixel])
                })
                .collect()
        })
        .collect();
    let mut data = vec![0.0; n * NUM_CLASSES];
    for (i, p) in rows.into_iter().flatten().enumerate() {
        for k in 0..NUM_CLASSES {
            data[k * n + i] = p[k];
        }
    }
    ProbabilityMap::new(w, h, data)
}

fn log_untrained() {
    eprintln!("warning: predicting with an untrained model (all-zero weights give uniform probabilities)");
}

/// Pads to a multiple of `pad_multiple`, predicts, takes the argmax and
/// removes the padding again.
pub fn segment(clf: &LocalWindowClassifier, img: &IntensityRaster, pad_multiple: usize) -> Result<LabelMap> {
    let (padded, original) = pad_to_multiple(img, pad_multiple)?;
    let probs = predict(clf, &padded)?;
    unpad_labels(&argmax_labels(&probs), original)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Fraction of crop pixels used as training samples.
    pub subsample: f64,
    pub seed: u64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 300, learning_rate: 2.0, subsample: 0.05, seed: 0, epsilon: DEFAULT_EPSILON }
    }
}

/// Training samples: standardized features with their labels.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
    pub dim: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Loss and gradient with respect to `weights` (same layout as the model).
pub fn loss_and_gradient(weights: &[f64], samples: &SampleSet, eps: f64) -> (f64, Vec<f64>) {
    let dim = samples.dim;
    let stride = dim + 1;
    let n = samples.len();
    let probs: Vec<[f64; NUM_CLASSES]> = samples
        .features
        .par_chunks(dim)
        .map(|f| class_probabilities(weights, f))
        .collect();

    // Per-channel S and Q sums, then dJ/dp per sample.
    let mut channel = Vec::with_capacity(NUM_CLASSES);
    let mut loss = 0.0;
    for k in 0..NUM_CLASSES {
        let x: Vec<f64> = probs.iter().map(|p| p[k]).collect();
        let y: Vec<f64> = samples.labels.iter().map(|&l| (l as usize == k + 1) as u8 as f64).collect();
        let (mut s, mut xx, mut yy) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(&y) {
            s += a * b;
            xx += a * a;
            yy += b * b;
        }
        let q = xx + yy - s;
        loss += if s == q { 0.0 } else { 1.0 - (s + eps) / (q + eps) };
        channel.push(grad_from_sums(&x, &y, s + eps, q + eps));
    }
    loss /= NUM_CLASSES as f64;

    let partials: Vec<Vec<f64>> = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| {
            let mut g = vec![0.0; NUM_CLASSES * stride];
            for &i in idx {
                let p = &probs[i];
                let dp: [f64; NUM_CLASSES] = std::array::from_fn(|k| channel[k][i] / NUM_CLASSES as f64);
                let inner: f64 = (0..NUM_CLASSES).map(|j| p[j] * dp[j]).sum();
                let f = &samples.features[i * dim..(i + 1) * dim];
                for k in 0..NUM_CLASSES {
                    let ds = p[k] * (dp[k] - inner);
                    let row = &mut g[k * stride..(k + 1) * stride];
                    for (gw, fv) in row.iter_mut().zip(f) {
                        *gw += ds * fv;
                    }
                    row[dim] += ds;
                }
            }
            g
        })
        .collect();
    let mut grad = vec![0.0; NUM_CLASSES * stride];
    for part in partials {
        for (a, b) in grad.iter_mut().zip(part) {
            *a += b;
        }
    }
    (loss, grad)
}

/// Per-feature mean and standard deviation (1 for constant features).
fn standardization(features: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (features.len() / dim) as f64;
    let mut mean = vec![0.0; dim];
    for row in features.chunks(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for row in features.chunks(dim) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let std = var.iter().map(|s| (s / n).sqrt()).map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
    (mean, std)
}

/// Draws the training samples from the crops.
pub fn collect_samples(crops: &[Crop], radius: usize, subsample: f64, seed: u64) -> Result<SampleSet> {
    let channels = crops.first().ok_or_else(|| Error::InvalidParameter("no training crops".into()))?.image.channels();
    let dim = channels * FEATURES_PER_CHANNEL;
    let maps: Vec<Vec<f64>> = crops.par_iter().map(|c| feature_map(&c.image, radius)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut features, mut labels) = (Vec::new(), Vec::new());
    for (crop, map) in crops.iter().zip(&maps) {
        if crop.image.channels() != channels {
            return Err(Error::InvalidParameter("crops mix channel counts".into()));
        }
        for (i, &label) in crop.labels.data().iter().enumerate() {
            if rng.random::<f64>() < subsample {
                features.extend_from_slice(&map[i * dim..(i + 1) * dim]);
                labels.push(label);
            }
        }
    }
    Ok(SampleSet { features, labels, dim })
}

/// Trains a copy of `clf`; returns it with the per-epoch loss history.
pub fn train(
    clf: &LocalWindowClassifier,
    crops: &[Crop],
    cfg: &TrainConfig,
) -> Result<(LocalWindowClassifier, Vec<f64>)> {
    clf.validate()?;
    if crops.is_empty() {
        return Err(Error::InvalidParameter("no training crops".into()));
    }
    if !(cfg.learning_rate > 0.0) || !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) || !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "learning rate, subsample and epsilon must be positive (subsample at most 1): {cfg:?}"
        )));
    }
    for crop in crops {
        clf.check_image(&crop.image)?;
    }
    if cfg.epochs == 0 {
        return Ok((clf.clone(), Vec::new()));
    }
    let mut samples = collect_samples(crops, clf.radius, cfg.subsample, cfg.seed)?;
    if samples.is_empty() {
        return Err(Error::InvalidParameter("subsampling kept no pixels".into()));
    }
    let dim = samples.dim;
    let stride = dim + 1;
    let (mean, std) = standardization(&samples.features, dim);
    for row in samples.features.chunks_mut(dim) {
        for ((v, m), s) in row.iter_mut().zip(&mean).zip(&std) {
            *v = (*v - m) / s;
        }
    }

    // Weights in standardized coordinates.
    let mut weights = clf.weights.clone();
    for k in 0..NUM_CLASSES {
        let row = &mut weights[k * stride..(k + 1) * stride];
        let mut bias = row[dim];
        for j in 0..dim {
            bias += row[j] * mean[j];
            row[j] *= std[j];
        }
        row[dim] = bias;
    }

    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (loss, grad) = loss_and_gradient(&weights, &samples, cfg.epsilon);
        history.push(loss);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * g;
        }
    }

    // Fold the standardization back into raw-feature weights.
    for k in 0..NUM_CLASSES {
        let row = &mut weights[k * stride..(k + 1) * stride];
        let mut bias = row[dim];
        for j in 0..dim {
            row[j] /= std[j];
            bias -= row[j] * mean[j];
        }
        row[dim] = bias;
    }
    let mut out = clf.clone();
    out.weights = weights;
    out.trained = true;
    out.seed = cfg.seed;
    out.validate()?;
    Ok((out, history))
}
