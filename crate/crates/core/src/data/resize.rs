//! Bilinear crop-and-resize to the network input size.

use super::Image;
use crate::error::{Error, Result};
use crate::nnet::INPUT_SIZE;

/// Axis-aligned crop rectangle in pixel units; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl CropBox {
    pub fn full(image: &Image) -> Self {
        CropBox { x: 0.0, y: 0.0, width: image.width() as f64, height: image.height() as f64 }
    }
}

/// Resamples `crop` of `image` to 32×32 with bilinear interpolation.
///
/// Pixel centres sit at half-integer coordinates; a sample at output pixel
/// `o` reads source coordinate `origin + (o + 0.5) · extent / 32 − 0.5`,
/// clamped to the image.
pub fn crop_and_resize(image: &Image, crop: CropBox) -> Result<Image> {
    let CropBox { x, y, width, height } = crop;
    let finite = [x, y, width, height].iter().all(|v| v.is_finite());
    if !finite || width <= 0.0 || height <= 0.0 {
        return Err(Error::InvalidArgument(format!("degenerate crop box {crop:?}")));
    }
    if x < 0.0 || y < 0.0 || x + width > image.width() as f64 || y + height > image.height() as f64 {
        return Err(Error::InvalidArgument(format!(
            "crop box {crop:?} exceeds {}x{} image",
            image.width(),
            image.height()
        )));
    }
    let out = INPUT_SIZE;
    let taps = |origin: f64, extent: f64, limit: usize| -> Vec<(usize, usize, f64)> {
        (0..out)
            .map(|o| {
                let s = (origin + (o as f64 + 0.5) * extent / out as f64 - 0.5).clamp(0.0, (limit - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(limit - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let rows = taps(y, height, image.height());
    let cols = taps(x, width, image.width());
    let mut data = Vec::with_capacity(out * out * 3);
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            let (a, b, c, d) = (image.pixel(y0, x0), image.pixel(y0, x1), image.pixel(y1, x0), image.pixel(y1, x1));
            for ch in 0..3 {
                let top = f64::from(a[ch]) * (1.0 - fx) + f64::from(b[ch]) * fx;
                let bottom = f64::from(c[ch]) * (1.0 - fx) + f64::from(d[ch]) * fx;
                data.push((top * (1.0 - fy) + bottom * fy) as f32);
            }
        }
    }
    Image::new(out, out, data)
}
