//! PNG and binary PGM (P5) at the file boundary.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use super::{to_grayscale, GrayImage, ImagingError, Raster, Result};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Identifies the container from its magic bytes.
pub fn sniff_format(bytes: &[u8]) -> Option<ImageFormat> {
    if bytes.starts_with(PNG_MAGIC) {
        Some(ImageFormat::Png)
    } else if bytes.starts_with(b"P5") {
        Some(ImageFormat::Pnm)
    } else {
        None
    }
}

/// Decodes PNG or P5 PGM bytes into a grayscale image. Color PNGs go
/// through [`to_grayscale`]; alpha is ignored.
pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    let format = sniff_format(bytes).ok_or(ImagingError::UnsupportedFormat)?;
    let decoded =
        image::load(Cursor::new(bytes), format).map_err(|e| ImagingError::Decode(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(buf) => GrayImage::new(w, h, buf.into_raw()),
        DynamicImage::ImageLuma16(_) if format == ImageFormat::Pnm => {
            Err(ImagingError::Decode("PGM maxval must be 255".into()))
        }
        other => to_grayscale(w, h, other.to_rgb8().as_raw()),
    }
}

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| ImagingError::Io(e.to_string()))?;
    decode_gray(&bytes)
}

/// Encodes an 8-bit grayscale PNG. Output bytes are a pure function of the
/// pixels.
pub fn encode_png(img: &impl Raster) -> Vec<u8> {
    let buf = image::GrayImage::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.pixels().to_vec(),
    )
    .expect("raster buffer matches its dimensions");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .expect("in-memory PNG encoding");
    out.into_inner()
}

/// Encodes a binary PGM (P5, maxval 255).
pub fn encode_pgm(img: &impl Raster) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}
