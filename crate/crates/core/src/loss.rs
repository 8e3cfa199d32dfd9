//! Soft Jaccard loss.
//!
//! For vectors `x`, `y` in `[0, 1]^n`, with `S = Σ x_i y_i` and
//! `Q = Σ x_i² + Σ y_i² - S`:
//!
//! ```text
//! J2(x, y) = 1 - (S + eps) / (Q + eps)
//! ∂J2/∂x_i = ((S + eps)(2 x_i - y_i) - y_i (Q + eps)) / (Q + eps)²
//! ```
//!
//! `Q - S = Σ (x_i - y_i)²`, so the loss is in `[0, 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{LabelMap, ProbabilityMap, NUM_CLASSES};

pub const DEFAULT_EPSILON: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub epsilon: f64,
}

impl LossConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Self { epsilon })
        } else {
            Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")))
        }
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON }
    }
}

fn validate(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    for v in [x, y] {
        if let Some(index) = v.iter().position(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::OutOfUnitRange { index, value: v[index] });
        }
    }
    Ok(())
}

/// `(S, Q)` for the two vectors.
fn sums(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    (xy, xx + yy - xy)
}

/// The soft Jaccard loss. `eps` may be zero as long as `Q > 0`.
pub fn jaccard_loss(x: &[f64], y: &[f64], eps: f64) -> Result<f64> {
    validate(x, y)?;
    let (s, q) = sums(x, y);
    if s == q {
        // Covers x == y exactly, including the all-zero case.
        return Ok(0.0);
    }
    Ok(1.0 - (s + eps) / (q + eps))
}

/// Gradient of [`jaccard_loss`] with respect to `x`.
pub fn jaccard_loss_grad(x: &[f64], y: &[f64], eps: f64) -> Result<Vec<f64>> {
    validate(x, y)?;
    let (s, q) = sums(x, y);
    Ok(grad_from_sums(x, y, s + eps, q + eps))
}

pub(crate) fn grad_from_sums(x: &[f64], y: &[f64], num: f64, den: f64) -> Vec<f64> {
    let den2 = den * den;
    x.iter().zip(y).map(|(&a, &b)| (num * (2.0 * a - b) - b * den) / den2).collect()
}

fn indicator(labels: &LabelMap, label: u8) -> Vec<f64> {
    labels.data().iter().map(|&l| if l == label { 1.0 } else { 0.0 }).collect()
}

/// Per-channel losses of a probability map against the one-hot view of `gt`.
pub fn channel_losses(probs: &ProbabilityMap, gt: &LabelMap, eps: f64) -> Result<[f64; NUM_CLASSES]> {
    if probs.dims() != gt.dims() {
        let ((pw, ph), (gw, gh)) = (probs.dims(), gt.dims());
        return Err(Error::DimensionMismatch { left: (pw, ph, NUM_CLASSES), right: (gw, gh, 1) });
    }
    let mut out = [0.0; NUM_CLASSES];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = jaccard_loss(probs.channel(k), &indicator(gt, k as u8 + 1), eps)?;
    }
    Ok(out)
}

/// Unweighted mean over the three channels of the per-channel loss.
pub fn multichannel_loss(probs: &ProbabilityMap, gt: &LabelMap, eps: f64) -> Result<f64> {
    let losses = channel_losses(probs, gt, eps)?;
    Ok(losses.iter().sum::<f64>() / NUM_CLASSES as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Central finite differences, independent of the analytic gradient.
    fn numeric_grad(x: &[f64], y: &[f64], eps: f64, step: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut hi = x.to_vec();
                let mut lo = x.to_vec();
                hi[i] += step;
                lo[i] -= step;
                let f = |v: &[f64]| {
                    let (s, q) = sums(v, y);
                    1.0 - (s + eps) / (q + eps)
                };
                (f(&hi) - f(&lo)) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn loss_examples() {
        assert_eq!(jaccard_loss(&[0.3, 0.9, 0.1], &[0.3, 0.9, 0.1], 1e-7).unwrap(), 0.0);
        let disjoint = jaccard_loss(&[1.0, 0.0], &[0.0, 1.0], 1e-7).unwrap();
        assert!((disjoint - (1.0 - 1e-7 / (2.0 + 1e-7))).abs() < 1e-15);
        assert!((disjoint - 0.99999995).abs() < 1e-9);
        let third = jaccard_loss(&[0.5], &[1.0], 0.0).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn loss_errors() {
        assert!(matches!(jaccard_loss(&[0.5], &[0.5, 0.5], 1e-7), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(
            jaccard_loss(&[0.5, 1.2], &[0.5, 0.5], 1e-7),
            Err(Error::OutOfUnitRange { index: 1, .. })
        ));
        assert!(jaccard_loss_grad(&[-0.1], &[0.5], 1e-7).is_err());
        assert!(LossConfig::new(0.0).is_err());
    }

    #[test]
    fn grad_examples() {
        let g = jaccard_loss_grad(&[0.2, 0.7, 1.0], &[0.2, 0.7, 1.0], 1e-7).unwrap();
        assert!(g.iter().all(|&v| v.abs() < 1e-12));

        let g = jaccard_loss_grad(&[0.5], &[1.0], 0.0).unwrap();
        assert!((g[0] + 4.0 / 3.0).abs() < 1e-12);
        let fd = numeric_grad(&[0.5], &[1.0], 0.0, 1e-5);
        assert!((fd[0] + 4.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn multichannel_examples() {
        let gt = LabelMap::from_rows(&["123", "321"]).unwrap();
        let exact = ProbabilityMap::one_hot(&gt);
        assert_eq!(multichannel_loss(&exact, &gt, 1e-7).unwrap(), 0.0);

        // Uniform 1/3 on an all-background map of n pixels:
        //   channel 0: S = n/3, Q = n/9 + n - n/3 = 7n/9
        //   channels 1, 2: S = 0, Q = n/9
        let n = 12.0;
        let eps = 1e-7;
        let gt = LabelMap::filled(4, 3, 1).unwrap();
        let uniform = ProbabilityMap::new(4, 3, vec![1.0 / 3.0; 36]).unwrap();
        let c0 = 1.0 - (n / 3.0 + eps) / (7.0 * n / 9.0 + eps);
        let c12 = 1.0 - eps / (n / 9.0 + eps);
        let expected = (c0 + 2.0 * c12) / 3.0;
        assert!((multichannel_loss(&uniform, &gt, eps).unwrap() - expected).abs() < 1e-12);

        let losses = channel_losses(&uniform, &gt, eps).unwrap();
        assert_eq!(multichannel_loss(&uniform, &gt, eps).unwrap(), losses.iter().sum::<f64>() / 3.0);

        let wrong = LabelMap::filled(3, 4, 1).unwrap();
        assert!(multichannel_loss(&uniform, &wrong, eps).is_err());
    }

    fn pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..max_len).prop_flat_map(|n| {
            (prop::collection::vec(0.0f64..=1.0, n), prop::collection::vec(0.0f64..=1.0, n))
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded((x, y) in pair(40)) {
            let a = jaccard_loss(&x, &y, 1e-7).unwrap();
            prop_assert_eq!(a, jaccard_loss(&y, &x, 1e-7).unwrap());
            prop_assert!((0.0..1.0).contains(&a));
            prop_assert!(jaccard_loss(&x, &x, 1e-7).unwrap().abs() <= 1e-12);
        }

        #[test]
        fn gradient_matches_finite_differences((x, y) in pair(12)) {
            // Keep away from the box edges so the stencil stays inside [0, 1].
            let x: Vec<f64> = x.iter().map(|v| 0.01 + 0.98 * v).collect();
            let analytic = jaccard_loss_grad(&x, &y, 1e-7).unwrap();
            let numeric = numeric_grad(&x, &y, 1e-7, 1e-5);
            let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
            for (a, n) in analytic.iter().zip(&numeric) {
                prop_assert!((a - n).abs() / scale <= 1e-6, "{} vs {}", a, n);
            }
        }
    }
}
