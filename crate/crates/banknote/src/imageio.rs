//! Image decoding and encoding (PNG, binary PPM/PNM, JPEG, BMP).

use std::path::Path;

use banknote_core::image::{from_u8, to_u8};
use banknote_core::Tensor;
use image::{ImageReader, RgbImage};

use crate::error::{AppError, Result};

/// Decodes any supported file to an `H×W×3` tensor in `[0, 1]`. The format
/// is guessed from the content, not the extension.
pub fn load_image(path: &Path) -> Result<Tensor<f32>> {
    let bad = |msg: String| AppError::Image {
        path: path.to_path_buf(),
        msg,
    };
    let img = ImageReader::open(path)
        .map_err(|e| AppError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| AppError::io(path, e))?
        .decode()
        .map_err(|e| bad(e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Ok(from_u8(h as usize, w as usize, 3, img.as_raw())?)
}

/// Writes an `H×W×3` tensor as 8-bit RGB; the extension picks the format.
pub fn save_image(path: &Path, image: &Tensor<f32>) -> Result<()> {
    let (h, w, c) = image.hwc()?;
    if c != 3 {
        return Err(AppError::Usage(format!("expected 3 channels, got {c}")));
    }
    let buf =
        RgbImage::from_raw(w as u32, h as u32, to_u8(image)).expect("buffer sized from the tensor");
    buf.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => AppError::io(path, io),
        other => AppError::Image {
            path: path.to_path_buf(),
            msg: other.to_string(),
        },
    })
}
