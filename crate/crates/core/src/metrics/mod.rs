//! Mask-pair quality metrics.
//!
//! Coarse-grained metrics (S-measure, E-measure, F-measure, MAE, MSE) score
//! whole-map agreement; fine-grained ones (Boundary IoU, weighted F-measure,
//! Pixel Accuracy) concentrate on contours and small errors.
//!
//! Every metric is a pure function of a [`MaskPair`]. [`evaluate_all`] runs
//! the full suite and carries per-metric failures alongside the values.

mod boundary_iou;
mod e_measure;
mod error;
mod f_measure;
mod pixel_accuracy;
mod s_measure;
mod weighted_f;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::MaskPair;

pub use boundary_iou::{boundary_iou, boundary_radius, DEFAULT_DILATION_RATIO};
pub use e_measure::{e_measure, e_measure_curve, e_measure_with};
pub use error::{mae, mse};
pub use f_measure::{f_measure, f_measure_curve, f_measure_with, F_BETA_SQUARED};
pub use pixel_accuracy::{pixel_accuracy, PixelAccuracyBreakdown, PixelAccuracyConfig};
pub use s_measure::{s_measure, S_ALPHA};
pub use weighted_f::{
    weighted_f_measure, WF_BETA_SQUARED, WF_DECAY_DISTANCE, WF_KERNEL_SIGMA, WF_KERNEL_SIZE,
};

/// Guard added to denominators (the spacing of 1.0 in `f64`).
pub const EPS: f64 = f64::EPSILON;

/// Number of thresholds swept by the threshold-based metrics (`0..=255`).
pub const THRESHOLD_COUNT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricId {
    #[serde(rename = "PA")]
    PixelAccuracy,
    #[serde(rename = "BIoU")]
    BoundaryIou,
    #[serde(rename = "WF")]
    WeightedF,
    #[serde(rename = "E")]
    EMeasure,
    #[serde(rename = "S")]
    SMeasure,
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "F")]
    FMeasure,
    #[serde(rename = "MSE")]
    Mse,
}

impl MetricId {
    /// Report column order.
    pub const ALL: [MetricId; 8] = [
        MetricId::PixelAccuracy,
        MetricId::BoundaryIou,
        MetricId::WeightedF,
        MetricId::EMeasure,
        MetricId::SMeasure,
        MetricId::Mae,
        MetricId::FMeasure,
        MetricId::Mse,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricId::PixelAccuracy => "PA",
            MetricId::BoundaryIou => "BIoU",
            MetricId::WeightedF => "WF",
            MetricId::EMeasure => "E",
            MetricId::SMeasure => "S",
            MetricId::Mae => "MAE",
            MetricId::FMeasure => "F",
            MetricId::Mse => "MSE",
        }
    }

    /// Column heading used in rendered reports.
    pub fn title(&self) -> &'static str {
        match self {
            MetricId::PixelAccuracy => "Pixel Accuracy",
            MetricId::BoundaryIou => "Mean Boundary IoU",
            MetricId::WeightedF => "Weighted F-measure",
            MetricId::EMeasure => "E-measure",
            MetricId::SMeasure => "S-measure",
            MetricId::Mae => "MAE",
            MetricId::FMeasure => "F-measure",
            MetricId::Mse => "MSE",
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            MetricId::Mae | MetricId::Mse => Direction::LowerBetter,
            _ => Direction::HigherBetter,
        }
    }

    /// `true` when `a` is strictly better than `b` for this metric.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self.direction() {
            Direction::HigherBetter => a > b,
            Direction::LowerBetter => a < b,
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown metric `{0}` (expected one of PA, BIoU, WF, E, S, MAE, F, MSE)")]
pub struct UnknownMetric(pub String);

impl FromStr for MetricId {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// A single metric score. All metrics live in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: MetricId,
    pub value: f64,
}

impl MetricValue {
    pub fn new(metric: MetricId, value: f64) -> Self {
        Self { metric, value }
    }

    pub fn direction(&self) -> Direction {
        self.metric.direction()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error, Serialize, Deserialize)]
pub enum MetricError {
    /// Ground truth has no pixel above the foreground threshold.
    #[error("ground truth has no foreground pixel")]
    EmptyForeground,
    /// Neither mask has a boundary band.
    #[error("both boundary bands are empty")]
    EmptyBands,
}

/// Statistic taken over the 256-threshold curve of F- and E-measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdStatistic {
    #[default]
    Max,
    Mean,
}

impl ThresholdStatistic {
    fn reduce(&self, curve: &[f64]) -> f64 {
        match self {
            ThresholdStatistic::Max => curve.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ThresholdStatistic::Mean => curve.iter().sum::<f64>() / curve.len() as f64,
        }
    }
}

/// Settings shared by a full metric evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalConfig {
    pub pixel_accuracy: PixelAccuracyConfig,
    pub biou_dilation_ratio: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            pixel_accuracy: PixelAccuracyConfig::default(),
            biou_dilation_ratio: DEFAULT_DILATION_RATIO,
        }
    }
}

/// Outcome of one metric on one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub metric: MetricId,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Outcome {
    Value(f64),
    Absent(MetricError),
}

impl MetricEntry {
    pub fn value(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Value(v) => Some(v),
            Outcome::Absent(_) => None,
        }
    }

    fn from_result(metric: MetricId, result: Result<f64, MetricError>) -> Self {
        Self {
            metric,
            outcome: match result {
                Ok(v) => Outcome::Value(v),
                Err(e) => Outcome::Absent(e),
            },
        }
    }
}

/// All eight metrics for one pair, in [`MetricId::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageScores(pub Vec<MetricEntry>);

impl ImageScores {
    pub fn get(&self, metric: MetricId) -> Option<f64> {
        self.entry(metric).and_then(MetricEntry::value)
    }

    pub fn entry(&self, metric: MetricId) -> Option<&MetricEntry> {
        self.0.iter().find(|e| e.metric == metric)
    }

    pub fn entries(&self) -> &[MetricEntry] {
        &self.0
    }
}

/// Runs every metric on `pair`. A failing metric is recorded as absent with
/// its reason; the others are still computed.
pub fn evaluate_all(pair: &MaskPair, cfg: &EvalConfig) -> ImageScores {
    let value = |r: Result<MetricValue, MetricError>| r.map(|v| v.value);
    let entries = MetricId::ALL
        .iter()
        .map(|&metric| {
            let result = match metric {
                MetricId::PixelAccuracy => {
                    pixel_accuracy(pair, &cfg.pixel_accuracy).map(|b| b.score)
                }
                MetricId::BoundaryIou => value(boundary_iou(pair, cfg.biou_dilation_ratio)),
                MetricId::WeightedF => value(weighted_f_measure(pair)),
                MetricId::EMeasure => Ok(e_measure(pair).value),
                MetricId::SMeasure => Ok(s_measure(pair).value),
                MetricId::Mae => Ok(mae(pair).value),
                MetricId::FMeasure => value(f_measure(pair)),
                MetricId::Mse => Ok(mse(pair).value),
            };
            MetricEntry::from_result(metric, result)
        })
        .collect();
    ImageScores(entries)
}
