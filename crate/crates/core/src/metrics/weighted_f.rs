use super::{MetricError, MetricId, MetricValue, EPS};
use crate::mask::{binarize, MaskPair, FOREGROUND_THRESHOLD};
use crate::morphology::distance_transform;

/// `beta^2` of the weighted F-measure.
pub const WF_BETA_SQUARED: f64 = 1.0;
/// Side of the square smoothing kernel.
pub const WF_KERNEL_SIZE: usize = 7;
/// Standard deviation of the smoothing kernel.
pub const WF_KERNEL_SIGMA: f64 = 5.0;
/// Distance at which a background error's extra weight halves.
pub const WF_DECAY_DISTANCE: f64 = 5.0;

/// Normalized 1-D Gaussian; its outer product is the normalized 2-D kernel.
fn gaussian_taps() -> [f64; WF_KERNEL_SIZE] {
    let half = (WF_KERNEL_SIZE / 2) as f64;
    let mut taps = [0.0; WF_KERNEL_SIZE];
    for (i, tap) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *tap = (-(d * d) / (2.0 * WF_KERNEL_SIGMA * WF_KERNEL_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Zero-padded separable convolution with a symmetric kernel.
fn smooth(values: &[f64], w: usize, h: usize) -> Vec<f64> {
    let taps = gaussian_taps();
    let half = (WF_KERNEL_SIZE / 2) as isize;
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, tap) in taps.iter().enumerate() {
                let sx = x as isize + k as isize - half;
                if sx >= 0 && (sx as usize) < w {
                    acc += tap * values[y * w + sx as usize];
                }
            }
            rows[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, tap) in taps.iter().enumerate() {
                let sy = y as isize + k as isize - half;
                if sy >= 0 && (sy as usize) < h {
                    acc += tap * rows[sy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Weighted F-measure.
///
/// Errors `|pred/255 - gt|` at background pixels are replaced by the error
/// of their nearest foreground pixel (averaged over equally near ones), the
/// field is smoothed with a 7x7 Gaussian (sigma 5, zero padding), and each
/// foreground pixel keeps the smaller of its raw and smoothed error.
/// Background errors are weighted by `2 - exp(ln(0.5) / 5 * d)` where `d` is
/// the distance to the foreground.
pub fn weighted_f_measure(pair: &MaskPair) -> Result<MetricValue, MetricError> {
    let (w, h) = (pair.width(), pair.height());
    let gt = binarize(pair.ground_truth(), FOREGROUND_THRESHOLD);
    let field = distance_transform(&gt).map_err(|_| MetricError::EmptyForeground)?;
    let fg = gt.bits();
    let error: Vec<f64> = pair
        .prediction()
        .normalized()
        .iter()
        .zip(fg)
        .map(|(&p, &g)| (p - if g { 1.0 } else { 0.0 }).abs())
        .collect();

    let propagated: Vec<f64> = (0..w * h)
        .map(|i| {
            if fg[i] {
                error[i]
            } else {
                let ties = field.nearest_ties(i);
                ties.iter().map(|&j| error[j]).sum::<f64>() / ties.len() as f64
            }
        })
        .collect();
    let smoothed = smooth(&propagated, w, h);

    let decay = 0.5f64.ln() / WF_DECAY_DISTANCE;
    let (mut fg_count, mut fg_weighted, mut bg_weighted) = (0usize, 0.0, 0.0);
    for i in 0..w * h {
        if fg[i] {
            fg_count += 1;
            fg_weighted += error[i].min(smoothed[i]);
        } else {
            let importance = 2.0 - (decay * field.distance(i)).exp();
            bg_weighted += error[i] * importance;
        }
    }
    let tp = fg_count as f64 - fg_weighted;
    let recall = 1.0 - fg_weighted / fg_count as f64;
    let precision = tp / (tp + bg_weighted + EPS);
    let value = (1.0 + WF_BETA_SQUARED) * recall * precision
        / (recall + WF_BETA_SQUARED * precision + EPS);
    Ok(MetricValue::new(MetricId::WeightedF, value))
}
