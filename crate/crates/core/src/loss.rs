//! Forward-only scoring of the SSIM + MAE + IoU training objective, plus BCE.
//!
//! All terms operate on masks normalized to `[0, 1]`. Nothing here computes
//! gradients; the values are meant for comparing checkpoints and for
//! regression tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::MaskPair;
use crate::metrics;

/// Side of the SSIM window.
pub const SSIM_WINDOW: usize = 11;
/// Standard deviation of the SSIM window.
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
/// Guard inside the BCE logarithms.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LossError {
    #[error("masks are {width}x{height}, SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}")]
    TooSmall { width: usize, height: usize },
    #[error("prediction and ground truth are both empty")]
    BothEmpty,
    #[error("loss weight {0} is negative")]
    NegativeWeight(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LossWeights {
    lambda_ssim: f64,
    lambda_mae: f64,
    lambda_iou: f64,
}

impl LossWeights {
    pub fn new(lambda_ssim: f64, lambda_mae: f64, lambda_iou: f64) -> Result<Self, LossError> {
        for w in [lambda_ssim, lambda_mae, lambda_iou] {
            if w.is_nan() || w < 0.0 {
                return Err(LossError::NegativeWeight(w));
            }
        }
        Ok(Self {
            lambda_ssim,
            lambda_mae,
            lambda_iou,
        })
    }

    pub fn lambda_ssim(&self) -> f64 {
        self.lambda_ssim
    }

    pub fn lambda_mae(&self) -> f64 {
        self.lambda_mae
    }

    pub fn lambda_iou(&self) -> f64 {
        self.lambda_iou
    }
}

impl Default for LossWeights {
    /// 10 / 90 / 0.25 for SSIM / MAE / IoU.
    fn default() -> Self {
        Self {
            lambda_ssim: 10.0,
            lambda_mae: 90.0,
            lambda_iou: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LossBreakdown {
    pub ssim: f64,
    pub mae: f64,
    pub iou: f64,
    /// Reported alongside, not part of `total`.
    pub bce: f64,
    pub total: f64,
}

fn window_taps() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Gaussian-weighted sums over every fully contained window ("valid" mode).
fn filter_valid(values: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &values[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&line[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all valid 11x11 Gaussian windows.
pub fn mean_ssim(pair: &MaskPair) -> Result<f64, LossError> {
    let (w, h) = (pair.width(), pair.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(LossError::TooSmall {
            width: w,
            height: h,
        });
    }
    let x = pair.prediction().normalized();
    let y = pair.ground_truth().normalized();
    let taps = window_taps();
    let products = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p * q).collect()
    };
    let mu_x = filter_valid(&x, w, h, &taps);
    let mu_y = filter_valid(&y, w, h, &taps);
    let xx = filter_valid(&products(&x, &x), w, h, &taps);
    let yy = filter_valid(&products(&y, &y), w, h, &taps);
    let xy = filter_valid(&products(&x, &y), w, h, &taps);
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = xx[i] - mx * mx;
            let var_y = yy[i] - my * my;
            let cov = xy[i] - mx * my;
            ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (var_x + var_y + SSIM_C2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

/// `1 - mean SSIM`, clamped to `[0, 1]`.
pub fn ssim_loss(pair: &MaskPair) -> Result<f64, LossError> {
    Ok((1.0 - mean_ssim(pair)?).clamp(0.0, 1.0))
}

/// Identical to the MAE metric.
pub fn mae_loss(pair: &MaskPair) -> f64 {
    metrics::mae(pair).value
}

/// Soft IoU loss: `1 - sum(p g) / sum(p + g - p g)`.
pub fn iou_loss(pair: &MaskPair) -> Result<f64, LossError> {
    let (mut inter, mut union) = (0u64, 0u64);
    for (&p, &g) in pair
        .prediction()
        .values()
        .iter()
        .zip(pair.ground_truth().values())
    {
        let (p, g) = (u64::from(p), u64::from(g));
        inter += p * g;
        union += 255 * (p + g) - p * g;
    }
    if union == 0 {
        return Err(LossError::BothEmpty);
    }
    Ok(1.0 - inter as f64 / union as f64)
}

/// Mean binary cross-entropy of the normalized prediction against the
/// normalized ground truth.
pub fn bce_score(pair: &MaskPair) -> f64 {
    let sum: f64 = pair
        .prediction()
        .normalized()
        .iter()
        .zip(pair.ground_truth().normalized())
        .map(|(&p, g)| g * (p + BCE_EPS).ln() + (1.0 - g) * (1.0 - p + BCE_EPS).ln())
        .sum();
    -sum / pair.pixel_count() as f64
}

pub fn composite_loss(pair: &MaskPair, weights: &LossWeights) -> Result<LossBreakdown, LossError> {
    let ssim = ssim_loss(pair)?;
    let mae = mae_loss(pair);
    let iou = iou_loss(pair)?;
    let bce = bce_score(pair);
    let total = weights.lambda_ssim * ssim + weights.lambda_mae * mae + weights.lambda_iou * iou;
    Ok(LossBreakdown {
        ssim,
        mae,
        iou,
        bce,
        total,
    })
}
