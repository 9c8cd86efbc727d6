use super::{MetricError, MetricId, MetricValue, ThresholdStatistic, THRESHOLD_COUNT};
use crate::mask::{MaskPair, FOREGROUND_THRESHOLD};

/// `beta^2` weighting precision over recall.
pub const F_BETA_SQUARED: f64 = 0.3;

/// Per-threshold pixel counts: `above[t]` counts prediction values `> t`
/// split by ground-truth class.
pub(crate) struct ThresholdCounts {
    pub fg_above: [u64; THRESHOLD_COUNT],
    pub bg_above: [u64; THRESHOLD_COUNT],
    pub fg_total: u64,
    pub total: u64,
}

impl ThresholdCounts {
    pub fn new(pair: &MaskPair) -> Self {
        let mut fg_hist = [0u64; THRESHOLD_COUNT];
        let mut bg_hist = [0u64; THRESHOLD_COUNT];
        for (&p, &g) in pair
            .prediction()
            .values()
            .iter()
            .zip(pair.ground_truth().values())
        {
            if g > FOREGROUND_THRESHOLD {
                fg_hist[usize::from(p)] += 1;
            } else {
                bg_hist[usize::from(p)] += 1;
            }
        }
        let mut fg_above = [0u64; THRESHOLD_COUNT];
        let mut bg_above = [0u64; THRESHOLD_COUNT];
        let (mut fg_acc, mut bg_acc) = (0, 0);
        for t in (0..THRESHOLD_COUNT).rev() {
            fg_above[t] = fg_acc;
            bg_above[t] = bg_acc;
            fg_acc += fg_hist[t];
            bg_acc += bg_hist[t];
        }
        Self {
            fg_above,
            bg_above,
            fg_total: fg_acc,
            total: fg_acc + bg_acc,
        }
    }
}

/// F-beta from confusion counts; zero when there is no true positive.
pub(crate) fn f_beta(tp: u64, fp: u64, fn_: u64, beta_squared: f64) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    (1.0 + beta_squared) * precision * recall / (beta_squared * precision + recall)
}

/// F-measure at every threshold `t` in `0..=255` (prediction bit set when
/// the value is strictly greater than `t`).
pub fn f_measure_curve(pair: &MaskPair) -> Result<Vec<f64>, MetricError> {
    let counts = ThresholdCounts::new(pair);
    if counts.fg_total == 0 {
        return Err(MetricError::EmptyForeground);
    }
    Ok((0..THRESHOLD_COUNT)
        .map(|t| {
            let tp = counts.fg_above[t];
            let fp = counts.bg_above[t];
            f_beta(tp, fp, counts.fg_total - tp, F_BETA_SQUARED)
        })
        .collect())
}

pub fn f_measure_with(
    pair: &MaskPair,
    statistic: ThresholdStatistic,
) -> Result<MetricValue, MetricError> {
    let curve = f_measure_curve(pair)?;
    Ok(MetricValue::new(MetricId::FMeasure, statistic.reduce(&curve)))
}

/// Maximum F-measure over the threshold sweep.
pub fn f_measure(pair: &MaskPair) -> Result<MetricValue, MetricError> {
    f_measure_with(pair, ThresholdStatistic::Max)
}
