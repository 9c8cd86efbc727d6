use super::f_measure::ThresholdCounts;
use super::{MetricId, MetricValue, ThresholdStatistic, EPS, THRESHOLD_COUNT};
use crate::mask::MaskPair;

fn enhanced_alignment(pred_bit: f64, gt_bit: f64, pred_mean: f64, gt_mean: f64) -> f64 {
    let (p, g) = (pred_bit - pred_mean, gt_bit - gt_mean);
    let alignment = 2.0 * p * g / (p * p + g * g + EPS);
    (alignment + 1.0) * (alignment + 1.0) / 4.0
}

/// Enhanced-alignment measure at every threshold `t` in `0..=255`.
///
/// Each binarized prediction is compared with the binarized ground truth;
/// a pixel's enhanced alignment depends only on its (prediction, truth) bit
/// pair, so the per-pixel sum reduces to four class counts. Values are
/// clamped to `[0, 1]`; the `N - 1` normalizer otherwise lets a perfect
/// prediction land slightly above one.
pub fn e_measure_curve(pair: &MaskPair) -> Vec<f64> {
    let counts = ThresholdCounts::new(pair);
    let n = counts.total as f64;
    let fg = counts.fg_total;
    let bg = counts.total - fg;
    let denominator = n - 1.0 + EPS;
    (0..THRESHOLD_COUNT)
        .map(|t| {
            let tp = counts.fg_above[t];
            let fp = counts.bg_above[t];
            let predicted = tp + fp;
            let sum = if fg == 0 {
                (counts.total - predicted) as f64
            } else if bg == 0 {
                predicted as f64
            } else {
                let pred_mean = predicted as f64 / n;
                let gt_mean = fg as f64 / n;
                let cell = |count: u64, pb: f64, gb: f64| {
                    count as f64 * enhanced_alignment(pb, gb, pred_mean, gt_mean)
                };
                cell(tp, 1.0, 1.0)
                    + cell(fp, 1.0, 0.0)
                    + cell(fg - tp, 0.0, 1.0)
                    + cell(bg - fp, 0.0, 0.0)
            };
            (sum / denominator).clamp(0.0, 1.0)
        })
        .collect()
}

pub fn e_measure_with(pair: &MaskPair, statistic: ThresholdStatistic) -> MetricValue {
    MetricValue::new(MetricId::EMeasure, statistic.reduce(&e_measure_curve(pair)))
}

/// Maximum E-measure over the threshold sweep.
pub fn e_measure(pair: &MaskPair) -> MetricValue {
    e_measure_with(pair, ThresholdStatistic::Max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::AlphaMask;

    #[test]
    fn perfect_mixed_prediction() {
        let gt = AlphaMask::from_fn(12, 12, |x, y| if x > y { 255 } else { 0 });
        let pair = MaskPair::new(gt.clone(), gt).unwrap();
        assert!((e_measure(&pair).value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_ground_truths() {
        let bg = AlphaMask::filled(6, 6, 0);
        let pred = AlphaMask::from_fn(6, 6, |x, _| (x * 40) as u8);
        let pair = MaskPair::new(pred.clone(), bg).unwrap();
        // at t = 255 nothing is predicted, matching the all-background truth
        assert_eq!(e_measure(&pair).value, 1.0);

        let fg = AlphaMask::filled(6, 6, 255);
        let pair = MaskPair::new(AlphaMask::filled(6, 6, 0), fg).unwrap();
        assert_eq!(e_measure(&pair).value, 0.0);
    }
}
