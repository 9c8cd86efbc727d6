use image::{ImageFormat, Rgb, RgbImage};
use thiserror::Error;
use toonbench_core::AlphaMask;

/// Side of one checkerboard square in pixels.
pub const CHECKER_CELL: u32 = 8;
const LIGHT: u8 = 255;
const DARK: u8 = 204;

#[derive(Debug, Error)]
pub enum CompositeError {
    #[error("image is {image_w}x{image_h} but mask is {mask_w}x{mask_h}")]
    DimensionMismatch {
        image_w: u32,
        image_h: u32,
        mask_w: usize,
        mask_h: usize,
    },
    #[error("checkerboard cell must be positive")]
    ZeroCell,
    #[error(transparent)]
    Encode(#[from] image::ImageError),
}

pub fn checker_value(x: u32, y: u32, cell: u32) -> u8 {
    if ((x / cell) + (y / cell)).is_multiple_of(2) {
        LIGHT
    } else {
        DARK
    }
}

fn blend(a: u8, fg: u8, bg: u8) -> u8 {
    let a = u32::from(a);
    ((a * u32::from(fg) + (255 - a) * u32::from(bg) + 127) / 255) as u8
}

/// Cut-out preview: the image weighted by alpha over a grey checkerboard.
/// Alpha 255 reproduces the image pixel, alpha 0 the board.
pub fn composite_over_checkerboard(
    image: &RgbImage,
    alpha: &AlphaMask,
    cell: u32,
) -> Result<RgbImage, CompositeError> {
    if cell == 0 {
        return Err(CompositeError::ZeroCell);
    }
    let (w, h) = image.dimensions();
    if w as usize != alpha.width() || h as usize != alpha.height() {
        return Err(CompositeError::DimensionMismatch {
            image_w: w,
            image_h: h,
            mask_w: alpha.width(),
            mask_h: alpha.height(),
        });
    }
    Ok(RgbImage::from_fn(w, h, |x, y| {
        let a = alpha.get(x as usize, y as usize);
        let bg = checker_value(x, y, cell);
        let Rgb(px) = *image.get_pixel(x, y);
        Rgb(px.map(|c| blend(a, c, bg)))
    }))
}

pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>, CompositeError> {
    let mut out = std::io::Cursor::new(Vec::new());
    image.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}
