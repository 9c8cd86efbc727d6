use super::{MetricError, MetricId, MetricValue};
use crate::mask::{binarize, MaskPair, FOREGROUND_THRESHOLD};
use crate::morphology::boundary_band;

/// Band radius as a fraction of the image diagonal.
pub const DEFAULT_DILATION_RATIO: f64 = 0.02;

/// `max(1, round(ratio * diagonal))`.
pub fn boundary_radius(width: usize, height: usize, dilation_ratio: f64) -> usize {
    let diagonal = ((width * width + height * height) as f64).sqrt();
    ((dilation_ratio * diagonal).round() as usize).max(1)
}

/// IoU of the inner boundary bands of the binarized prediction and truth.
pub fn boundary_iou(pair: &MaskPair, dilation_ratio: f64) -> Result<MetricValue, MetricError> {
    let radius = boundary_radius(pair.width(), pair.height(), dilation_ratio);
    let gt_band = boundary_band(&binarize(pair.ground_truth(), FOREGROUND_THRESHOLD), radius);
    let pred_band = boundary_band(&binarize(pair.prediction(), FOREGROUND_THRESHOLD), radius);
    let (mut inter, mut union) = (0usize, 0usize);
    for (&g, &p) in gt_band.bits().iter().zip(pred_band.bits()) {
        inter += usize::from(g && p);
        union += usize::from(g || p);
    }
    if union == 0 {
        return Err(MetricError::EmptyBands);
    }
    Ok(MetricValue::new(
        MetricId::BoundaryIou,
        inter as f64 / union as f64,
    ))
}
