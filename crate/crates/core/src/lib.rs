//! Evaluation toolkit for dichotomous image segmentation and background removal.
//!
//! Masks are 8-bit alpha grids (0 = background, 255 = foreground). The crate
//! provides:
//!
//! - [`mask`]: decoding, binarization and elementwise primitives
//! - [`morphology`]: erosion, dilation, boundary bands and an exact Euclidean
//!   distance transform
//! - [`metrics`]: Pixel Accuracy, Boundary IoU, weighted F-measure,
//!   F-measure, E-measure, S-measure, MAE and MSE
//! - [`loss`]: forward-only SSIM + MAE + IoU composite loss and BCE
//! - [`dataset`]: manifests, stratified 80/10/10 splits and hard-example curation
//! - [`bench`]: batch evaluation, report rendering and checkpoint selection
//! - [`concordance`]: agreement between metrics and human rankings
//! - [`synthetic`]: generated silhouettes and datasets for demos and tests

pub mod bench;
pub mod concordance;
pub mod dataset;
pub mod loss;
pub mod mask;
pub mod metrics;
pub mod morphology;
pub mod synthetic;

pub use mask::{AlphaMask, BinaryMask, MaskError, MaskPair};
pub use metrics::{Direction, MetricId, MetricValue, PixelAccuracyConfig};
