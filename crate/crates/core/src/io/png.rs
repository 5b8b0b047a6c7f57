use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use super::{read_file, write_file, IoError};
use crate::image::Image;

/// Encode as an 8-bit RGB PNG; values are clamped to `[0, 1]` and rounded.
pub fn encode_png(img: &Image) -> Result<Vec<u8>, IoError> {
    let w = u32::try_from(img.width).map_err(|_| IoError::Parse("image too wide".into()))?;
    let h = u32::try_from(img.height).map_err(|_| IoError::Parse("image too tall".into()))?;
    let buf = RgbImage::from_raw(w, h, img.to_rgb8())
        .ok_or_else(|| IoError::Parse("image buffer size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> Result<Image, IoError> {
    let rgb = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    Image::from_rgb8(w as usize, h as usize, rgb.as_raw())
        .ok_or_else(|| IoError::Parse("decoded PNG has unexpected size".into()))
}

pub fn save_png(path: &Path, img: &Image) -> Result<(), IoError> {
    write_file(path, &encode_png(img)?)
}

pub fn load_png(path: &Path) -> Result<Image, IoError> {
    decode_png(&read_file(path)?)
}
