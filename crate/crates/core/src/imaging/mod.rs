//! Raster types and the feature-extraction half of the pipeline.
//!
//! A captured photo is reduced to grayscale, thresholded with Otsu's method,
//! flipped to dark-on-light if needed, split into digits by vertical
//! projection and finally scaled to fixed 15×45 bitmaps.

mod blur;
pub mod io;
mod segment;
mod threshold;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blur::{blur_score, box_blur};
pub use segment::{
    column_profile, normalize_digit, segment_digits, to_feature_vector, ColumnProfile, Segment,
    SegmentParams,
};
pub use threshold::{binarize, normalize_polarity, otsu_threshold, to_grayscale};

/// Width of a normalized digit bitmap.
pub const DIGIT_WIDTH: usize = 15;
/// Height of a normalized digit bitmap.
pub const DIGIT_HEIGHT: usize = 45;
/// Length of the flattened feature vector (15 × 45).
pub const FEATURE_DIM: usize = DIGIT_WIDTH * DIGIT_HEIGHT;

pub const BLACK: u8 = 0;
pub const WHITE: u8 = 255;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("buffer holds {actual} values but {width}x{height} requires {expected}")]
    DimensionMismatch {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("binary image pixel {value} at index {index} is neither 0 nor 255")]
    NotBinary { index: usize, value: u8 },
    #[error("all pixels share the value {0}; no threshold separates them")]
    UniformImage(u8),
    #[error("threshold {0} outside 0..=254")]
    InvalidThreshold(u16),
    #[error("bounds {bounds} do not fit a {width}x{height} image")]
    OutOfBounds {
        bounds: Bounds,
        width: usize,
        height: usize,
    },
    #[error("malformed bounds {0:?}; expected \"x,y,w,h\" with w,h >= 1")]
    MalformedBounds(String),
    #[error("no digits found")]
    NoDigitsFound,
    #[error("slice contains no black pixels")]
    EmptySlice,
    #[error("digit sample must be 15x45, got {width}x{height}")]
    BadSampleSize { width: usize, height: usize },
    #[error("image is {width}x{height}; blur scoring needs at least 3x3")]
    ImageTooSmall { width: usize, height: usize },
    #[error("unsupported image format (expected PNG or binary PGM)")]
    UnsupportedFormat,
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("cannot read image: {0}")]
    Io(String),
}

pub type Result<T, E = ImagingError> = std::result::Result<T, E>;

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptyImage { width, height });
    }
    let expected = width * height;
    if expected != len {
        return Err(ImagingError::DimensionMismatch {
            width,
            height,
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// Common read access for the two raster kinds.
pub trait Raster: Sized {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn pixels(&self) -> &[u8];

    /// Builds a raster of the same kind. Callers guarantee the invariants.
    #[doc(hidden)]
    fn from_raw_unchecked(width: usize, height: usize, pixels: Vec<u8>) -> Self;

    #[inline]
    fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels()[y * self.width() + x]
    }

    fn row(&self, y: usize) -> &[u8] {
        let w = self.width();
        &self.pixels()[y * w..(y + 1) * w]
    }

    /// Copies the rectangle `bounds` out of the image.
    fn crop(&self, bounds: Bounds) -> Result<Self> {
        bounds.check_within(self.width(), self.height())?;
        let (x, y, w, h) = bounds.as_usize();
        let mut out = Vec::with_capacity(w * h);
        for row in y..y + h {
            out.extend_from_slice(&self.row(row)[x..x + w]);
        }
        Ok(Self::from_raw_unchecked(w, h, out))
    }
}

/// 8-bit grayscale raster, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }
}

impl Raster for GrayImage {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn pixels(&self) -> &[u8] {
        &self.pixels
    }
    fn from_raw_unchecked(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        Self {
            width,
            height,
            pixels,
        }
    }
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

/// Black/white raster: every pixel is either [`BLACK`] or [`WHITE`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, &v)| v != BLACK && v != WHITE)
        {
            return Err(ImagingError::NotBinary { index, value });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, black: bool) -> Result<Self> {
        Self::new(
            width,
            height,
            vec![if black { BLACK } else { WHITE }; width * height],
        )
    }

    /// Builds an image from a predicate returning `true` for black pixels.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut is_black: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(if is_black(x, y) { BLACK } else { WHITE });
            }
        }
        Self::new(width, height, pixels)
    }

    /// Parses an ASCII picture: `#` is black, anything else white.
    /// Handy for small fixtures.
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut pixels = Vec::with_capacity(width * height);
        for row in rows {
            let mut n = 0;
            for c in row.chars() {
                pixels.push(if c == '#' { BLACK } else { WHITE });
                n += 1;
            }
            if n != width {
                return Err(ImagingError::DimensionMismatch {
                    width,
                    height,
                    expected: width * height,
                    actual: pixels.len(),
                });
            }
        }
        Self::new(width, height, pixels)
    }

    #[inline]
    pub fn is_black(&self, x: usize, y: usize) -> bool {
        self.get(x, y) == BLACK
    }

    pub fn black_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == BLACK).count()
    }

    pub fn invert(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| WHITE - p).collect(),
        }
    }
}

impl Raster for BinaryImage {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn pixels(&self) -> &[u8] {
        &self.pixels
    }
    fn from_raw_unchecked(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        Self {
            width,
            height,
            pixels,
        }
    }
}

impl fmt::Debug for BinaryImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryImage({}x{})", self.width, self.height)?;
        if self.width <= 64 && self.height <= 96 {
            for y in 0..self.height {
                let line: String = self
                    .row(y)
                    .iter()
                    .map(|&p| if p == BLACK { '#' } else { '.' })
                    .collect();
                writeln!(f, "{line}")?;
            }
        }
        Ok(())
    }
}

/// A rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Bounds {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width as u32, height as u32)
    }

    fn as_usize(self) -> (usize, usize, usize, usize) {
        (
            self.x as usize,
            self.y as usize,
            self.w as usize,
            self.h as usize,
        )
    }

    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        let (x, y, w, h) = self.as_usize();
        if w == 0 || h == 0 || x + w > width || y + h > height {
            return Err(ImagingError::OutOfBounds {
                bounds: *self,
                width,
                height,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl FromStr for Bounds {
    type Err = ImagingError;

    fn from_str(s: &str) -> Result<Self> {
        let malformed = || ImagingError::MalformedBounds(s.to_string());
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| malformed())?;
        match parts[..] {
            [x, y, w, h] if w >= 1 && h >= 1 => Ok(Self { x, y, w, h }),
            _ => Err(malformed()),
        }
    }
}

/// A normalized 15×45 digit bitmap with an optional class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitSample {
    bitmap: BinaryImage,
    label: Option<u8>,
}

impl DigitSample {
    pub fn new(bitmap: BinaryImage, label: Option<u8>) -> Result<Self> {
        if bitmap.width() != DIGIT_WIDTH || bitmap.height() != DIGIT_HEIGHT {
            return Err(ImagingError::BadSampleSize {
                width: bitmap.width(),
                height: bitmap.height(),
            });
        }
        Ok(Self { bitmap, label })
    }

    pub fn bitmap(&self) -> &BinaryImage {
        &self.bitmap
    }

    pub fn label(&self) -> Option<u8> {
        self.label
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = Some(label);
        self
    }
}
