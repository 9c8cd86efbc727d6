//! Mask containers, PNG decoding and per-pixel primitives.

use std::io::BufWriter;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};
use thiserror::Error;

/// Default foreground threshold: a pixel is foreground when its alpha is
/// strictly greater than this value.
pub const FOREGROUND_THRESHOLD: u8 = 128;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("cannot decode {path}: {reason}")]
    DecodeError { path: String, reason: String },
    #[error("mask has a zero dimension")]
    ZeroDimension,
    #[error("value buffer has {actual} entries, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dimension mismatch: prediction {pred_w}x{pred_h}, ground truth {gt_w}x{gt_h}")]
    DimensionMismatch {
        pred_w: usize,
        pred_h: usize,
        gt_w: usize,
        gt_h: usize,
    },
    #[error("cannot write {path}: {reason}")]
    EncodeError { path: String, reason: String },
}

/// 8-bit alpha grid stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AlphaMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl std::fmt::Debug for AlphaMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlphaMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl AlphaMask {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::ZeroDimension);
        }
        let expected = width * height;
        if values.len() != expected {
            return Err(MaskError::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Mask with every pixel set to `value`.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("non-zero dimensions")
    }

    /// Builds a mask by evaluating `f(x, y)` at every pixel.
    ///
    /// Panics if either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values).expect("non-zero dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    /// Number of pixels strictly above `threshold`.
    pub fn count_above(&self, threshold: u8) -> usize {
        self.values.iter().filter(|&&v| v > threshold).count()
    }

    /// Values mapped to `[0, 1]` by dividing by 255.
    pub fn normalized(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v) / 255.0).collect()
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(x, self.height - 1 - y)
        })
    }

    /// Rotates 90 degrees clockwise; the result is `height x width`.
    pub fn rotate90(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| {
            self.get(y, self.height - 1 - x)
        })
    }

    /// Writes the mask as an 8-bit grayscale PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), MaskError> {
        let path = path.as_ref();
        let encode_err = |reason: String| MaskError::EncodeError {
            path: path.display().to_string(),
            reason,
        };
        let file = std::fs::File::create(path).map_err(|e| encode_err(e.to_string()))?;
        self.write_png(BufWriter::new(file))
            .map_err(|e| encode_err(e.to_string()))
    }

    /// Encodes the mask as an 8-bit grayscale PNG into `writer`.
    pub fn write_png<W: std::io::Write>(&self, writer: W) -> image::ImageResult<()> {
        let encoder = image::codecs::png::PngEncoder::new(writer);
        image::ImageEncoder::write_image(
            encoder,
            &self.values,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
        )
    }
}

/// Row-major boolean grid.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMask {}x{}", self.width, self.height)?;
        for row in self.bits.chunks(self.width) {
            let line: String = row.iter().map(|&b| if b { '#' } else { '.' }).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::ZeroDimension);
        }
        if bits.len() != width * height {
            return Err(MaskError::LengthMismatch {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// Panics if either dimension is zero.
    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height]).expect("non-zero dimensions")
    }

    /// Panics if either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits).expect("non-zero dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    /// `self AND NOT other`. Panics on a dimension mismatch.
    pub fn and_not(&self, other: &BinaryMask) -> Self {
        assert_eq!((self.width, self.height), (other.width, other.height));
        Self {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a && !b)
                .collect(),
        }
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// 0/255 alpha rendering of the bits.
    pub fn to_alpha(&self) -> AlphaMask {
        AlphaMask {
            width: self.width,
            height: self.height,
            values: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

/// Prediction and ground truth of identical dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPair {
    prediction: AlphaMask,
    ground_truth: AlphaMask,
}

impl MaskPair {
    pub fn new(prediction: AlphaMask, ground_truth: AlphaMask) -> Result<Self, MaskError> {
        if prediction.width != ground_truth.width || prediction.height != ground_truth.height {
            return Err(MaskError::DimensionMismatch {
                pred_w: prediction.width,
                pred_h: prediction.height,
                gt_w: ground_truth.width,
                gt_h: ground_truth.height,
            });
        }
        Ok(Self {
            prediction,
            ground_truth,
        })
    }

    pub fn prediction(&self) -> &AlphaMask {
        &self.prediction
    }

    pub fn ground_truth(&self) -> &AlphaMask {
        &self.ground_truth
    }

    pub fn width(&self) -> usize {
        self.prediction.width
    }

    pub fn height(&self) -> usize {
        self.prediction.height
    }

    pub fn pixel_count(&self) -> usize {
        self.prediction.values.len()
    }

    /// Applies the same geometric transform to both masks.
    pub fn map_both(&self, f: impl Fn(&AlphaMask) -> AlphaMask) -> Self {
        Self {
            prediction: f(&self.prediction),
            ground_truth: f(&self.ground_truth),
        }
    }
}

/// Reads a PNG as an alpha mask.
///
/// Single-channel 8-bit data is copied verbatim. Inputs with an alpha channel
/// yield that channel, other colour inputs yield Rec.601 luminance. 16-bit
/// samples are rescaled by dividing by 257 (round half up).
pub fn load_mask(path: impl AsRef<Path>) -> Result<AlphaMask, MaskError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    if !path.is_file() {
        return Err(MaskError::FileNotFound(shown));
    }
    let decode_err = |reason: String| MaskError::DecodeError {
        path: shown.clone(),
        reason,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| decode_err(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png) => {}
        Some(other) => return Err(decode_err(format!("unsupported container {other:?}"))),
        None => return Err(decode_err("unrecognized container".to_string())),
    }
    let image = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    decode_dynamic(image).map_err(|e| match e {
        MaskError::DecodeError { reason, .. } => decode_err(reason),
        other => other,
    })
}

/// Decodes an in-memory PNG using the same channel rules as [`load_mask`].
pub fn decode_png(bytes: &[u8]) -> Result<AlphaMask, MaskError> {
    let image = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
        MaskError::DecodeError {
            path: "<memory>".to_string(),
            reason: e.to_string(),
        }
    })?;
    decode_dynamic(image)
}

fn decode_dynamic(image: DynamicImage) -> Result<AlphaMask, MaskError> {
    let (width, height) = (image.width() as usize, image.height() as usize);
    if width == 0 || height == 0 {
        return Err(MaskError::ZeroDimension);
    }
    let values: Vec<u8> = match image {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[1]).collect(),
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|p| luminance(p.0[0], p.0[1], p.0[2]))
            .collect(),
        DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| p.0[3]).collect(),
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| rescale_16(p.0[0])).collect(),
        DynamicImage::ImageLumaA16(buf) => buf.pixels().map(|p| rescale_16(p.0[1])).collect(),
        DynamicImage::ImageRgb16(buf) => buf
            .pixels()
            .map(|p| {
                luminance(
                    rescale_16(p.0[0]),
                    rescale_16(p.0[1]),
                    rescale_16(p.0[2]),
                )
            })
            .collect(),
        DynamicImage::ImageRgba16(buf) => buf.pixels().map(|p| rescale_16(p.0[3])).collect(),
        other => {
            return Err(MaskError::DecodeError {
                path: String::new(),
                reason: format!("unsupported pixel layout {:?}", other.color()),
            })
        }
    };
    AlphaMask::new(width, height, values)
}

/// Integer-rounded Rec.601 luma.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    ((weighted + 500) / 1000) as u8
}

/// `round_half_up(v / 257)`.
pub fn rescale_16(v: u16) -> u8 {
    ((2 * u32::from(v) + 257) / 514) as u8
}

/// Sets a bit wherever the alpha value is strictly greater than `threshold`.
pub fn binarize(mask: &AlphaMask, threshold: u8) -> BinaryMask {
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits: mask.values.iter().map(|&v| v > threshold).collect(),
    }
}

/// Per-pixel `|prediction - ground truth|`.
pub fn abs_diff(pair: &MaskPair) -> AlphaMask {
    AlphaMask {
        width: pair.width(),
        height: pair.height(),
        values: pair
            .prediction
            .values
            .iter()
            .zip(&pair.ground_truth.values)
            .map(|(&p, &g)| p.abs_diff(g))
            .collect(),
    }
}
