use super::{MetricId, MetricValue};
use crate::mask::MaskPair;

fn sums(pair: &MaskPair) -> (u64, u64) {
    pair.prediction()
        .values()
        .iter()
        .zip(pair.ground_truth().values())
        .fold((0u64, 0u64), |(abs, sq), (&p, &g)| {
            let d = u64::from(p.abs_diff(g));
            (abs + d, sq + d * d)
        })
}

/// Mean of `|pred - gt| / 255`.
pub fn mae(pair: &MaskPair) -> MetricValue {
    let (abs, _) = sums(pair);
    MetricValue::new(MetricId::Mae, abs as f64 / (255.0 * pair.pixel_count() as f64))
}

/// Mean of `((pred - gt) / 255)^2`.
pub fn mse(pair: &MaskPair) -> MetricValue {
    let (_, sq) = sums(pair);
    MetricValue::new(
        MetricId::Mse,
        sq as f64 / (255.0 * 255.0 * pair.pixel_count() as f64),
    )
}
