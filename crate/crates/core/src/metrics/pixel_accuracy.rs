use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::mask::{abs_diff, binarize, MaskPair, FOREGROUND_THRESHOLD};
use crate::morphology::{erode, StructuringElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PixelAccuracyConfig {
    /// A pixel is wrong when `|pred - gt|` exceeds this tolerance.
    pub delta: u8,
    /// Ground-truth pixels strictly above this value are foreground.
    pub foreground_threshold: u8,
    /// Erosions applied to the error mask before counting.
    pub erosion_iterations: usize,
}

impl Default for PixelAccuracyConfig {
    fn default() -> Self {
        Self {
            delta: 10,
            foreground_threshold: FOREGROUND_THRESHOLD,
            erosion_iterations: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PixelAccuracyBreakdown {
    pub incorrect_pixels: usize,
    pub foreground_pixels: usize,
    pub score: f64,
}

/// Squared fraction of correct pixels relative to the ground-truth foreground.
///
/// Pixels whose alpha differs by more than `delta` form an error mask, which
/// is eroded with the 3x3 square (border as background) so isolated and
/// one-pixel-wide errors vanish. The ratio of surviving errors to foreground
/// pixels is clamped to `[0, 1]` before squaring `1 - ratio`.
pub fn pixel_accuracy(
    pair: &MaskPair,
    cfg: &PixelAccuracyConfig,
) -> Result<PixelAccuracyBreakdown, MetricError> {
    let foreground_pixels = pair.ground_truth().count_above(cfg.foreground_threshold);
    if foreground_pixels == 0 {
        return Err(MetricError::EmptyForeground);
    }
    let errors = binarize(&abs_diff(pair), cfg.delta);
    let surviving = erode(
        &errors,
        StructuringElement::error_mask_default(),
        cfg.erosion_iterations,
    );
    let incorrect_pixels = surviving.count();
    let accuracy = (1.0 - incorrect_pixels as f64 / foreground_pixels as f64).max(0.0);
    Ok(PixelAccuracyBreakdown {
        incorrect_pixels,
        foreground_pixels,
        score: accuracy * accuracy,
    })
}
