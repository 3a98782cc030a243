//! Synthetic seven-segment renders.
//!
//! Digits are drawn as axis-aligned bars on a uniform background, then
//! sheared, brightness-shifted and sprinkled with salt-and-pepper noise, in
//! that order. Everything is a pure function of the inputs and the style's
//! seed.

mod corpus;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::GrayImage;

pub use corpus::{
    generate_corpus, read_manifest, write_manifest, CorpusManifest, CorpusSpec, ManifestEntry,
    StyleRanges, MANIFEST_FILE,
};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("digit {0} out of range 0..=9")]
    DigitOutOfRange(u8),
    #[error("invalid render style: {0}")]
    InvalidStyle(String),
    #[error("text {0:?} must be 1-3 characters 0-9")]
    InvalidText(String),
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("malformed manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = DatagenError> = std::result::Result<T, E>;

/// The seven bars of a digit cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SegmentId {
    /// Top bar.
    A,
    /// Upper right.
    B,
    /// Lower right.
    C,
    /// Bottom bar.
    D,
    /// Lower left.
    E,
    /// Upper left.
    F,
    /// Middle bar.
    G,
}

impl SegmentId {
    pub const ALL: [SegmentId; 7] = [
        Self::A,
        Self::B,
        Self::C,
        Self::D,
        Self::E,
        Self::F,
        Self::G,
    ];
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Self::A => 'a',
            Self::B => 'b',
            Self::C => 'c',
            Self::D => 'd',
            Self::E => 'e',
            Self::F => 'f',
            Self::G => 'g',
        };
        write!(f, "{c}")
    }
}

/// Lit segments for a digit, in `a..g` order.
pub fn segments_for(digit: u8) -> Result<&'static [SegmentId]> {
    use SegmentId::*;
    Ok(match digit {
        0 => &[A, B, C, D, E, F],
        1 => &[B, C],
        2 => &[A, B, D, E, G],
        3 => &[A, B, C, D, G],
        4 => &[B, C, F, G],
        5 => &[A, C, D, F, G],
        6 => &[A, C, D, E, F, G],
        7 => &[A, B, C],
        8 => &[A, B, C, D, E, F, G],
        9 => &[A, B, C, D, F, G],
        _ => return Err(DatagenError::DigitOutOfRange(digit)),
    })
}

/// Rendering parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    pub cell_width: u32,
    pub cell_height: u32,
    pub thickness: u32,
    /// Columns shifted per row, relative to the vertical centre.
    pub slant_shear: f64,
    pub fg: u8,
    pub bg: u8,
    pub noise_prob: f64,
    pub brightness_offset: i32,
    /// Background columns between neighbouring digit cells.
    pub gap_width: u32,
    /// Background border around the whole rendering.
    pub margin: u32,
    pub seed: u64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            cell_width: 30,
            cell_height: 90,
            thickness: 4,
            slant_shear: 0.0,
            fg: 30,
            bg: 230,
            noise_prob: 0.0,
            brightness_offset: 0,
            gap_width: 8,
            margin: 8,
            seed: 0,
        }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DatagenError::InvalidStyle(msg));
        if self.cell_width == 0 || self.cell_height == 0 {
            return bad("cell dimensions must be positive".into());
        }
        if self.thickness == 0 || 3 * self.thickness >= self.cell_width.min(self.cell_height) {
            return bad(format!(
                "thickness {} must be positive and below a third of min({}, {})",
                self.thickness, self.cell_width, self.cell_height
            ));
        }
        if self.fg == self.bg {
            return bad("fg and bg must differ".into());
        }
        if !(0.0..=1.0).contains(&self.noise_prob) {
            return bad(format!("noise_prob {} outside [0, 1]", self.noise_prob));
        }
        if !(-60..=60).contains(&self.brightness_offset) {
            return bad(format!(
                "brightness_offset {} outside -60..=60",
                self.brightness_offset
            ));
        }
        if !self.slant_shear.is_finite() {
            return bad("slant_shear must be finite".into());
        }
        Ok(())
    }
}

/// Renders a single digit cell (plus margin).
pub fn render_digit(digit: u8, style: &RenderStyle) -> Result<GrayImage> {
    render_digits(&[digit], style)
}

/// Renders a 1–3 digit number, cells left to right with `gap_width`
/// background columns between them.
pub fn render_number(text: &str, style: &RenderStyle) -> Result<GrayImage> {
    let digits = parse_label(text).ok_or_else(|| DatagenError::InvalidText(text.to_string()))?;
    render_digits(&digits, style)
}

/// Parses a 1–3 character decimal label into digits.
pub fn parse_label(text: &str) -> Option<Vec<u8>> {
    let digits: Vec<u8> = text
        .chars()
        .map(|c| c.to_digit(10).map(|d| d as u8))
        .collect::<Option<_>>()?;
    (1..=3).contains(&digits.len()).then_some(digits)
}

fn render_digits(digits: &[u8], style: &RenderStyle) -> Result<GrayImage> {
    style.validate()?;
    let (cw, ch) = (style.cell_width as usize, style.cell_height as usize);
    let (t, gap, m) = (
        style.thickness as usize,
        style.gap_width as usize,
        style.margin as usize,
    );
    let n = digits.len();
    let width = 2 * m + n * cw + n.saturating_sub(1) * gap;
    let height = 2 * m + ch;
    let mut img = GrayImage::filled(width, height, style.bg).expect("nonzero canvas");

    let mid = ch / 2;
    for (i, &d) in digits.iter().enumerate() {
        let (ox, oy) = (m + i * (cw + gap), m);
        for seg in segments_for(d)? {
            // (x0, x1, y0, y1) within the cell, half-open.
            let (x0, x1, y0, y1) = match seg {
                SegmentId::A => (0, cw, 0, t),
                SegmentId::D => (0, cw, ch - t, ch),
                SegmentId::G => (0, cw, mid - t / 2, mid - t / 2 + t),
                SegmentId::B => (cw - t, cw, 0, mid),
                SegmentId::C => (cw - t, cw, mid, ch),
                SegmentId::F => (0, t, 0, mid),
                SegmentId::E => (0, t, mid, ch),
            };
            for y in y0..y1 {
                for x in x0..x1 {
                    img.set(ox + x, oy + y, style.fg);
                }
            }
        }
    }

    if style.slant_shear != 0.0 {
        img = shear(&img, style.slant_shear, style.bg);
    }
    if style.brightness_offset != 0 {
        for p in img.pixels_mut() {
            *p = (*p as i32 + style.brightness_offset).clamp(0, 255) as u8;
        }
    }
    if style.noise_prob > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(style.seed);
        for p in img.pixels_mut() {
            if rng.random::<f64>() < style.noise_prob {
                *p = if rng.random_bool(0.5) { 255 } else { 0 };
            }
        }
    }
    Ok(img)
}

/// Horizontal shear about the vertical centre; uncovered pixels get `fill`.
fn shear(img: &GrayImage, per_row: f64, fill: u8) -> GrayImage {
    use crate::imaging::Raster;
    let (w, h) = (img.width(), img.height());
    let cy = (h as f64 - 1.0) / 2.0;
    GrayImage::from_fn(w, h, |x, y| {
        let shift = (per_row * (y as f64 - cy)).round() as isize;
        let sx = x as isize - shift;
        if (0..w as isize).contains(&sx) {
            img.get(sx as usize, y)
        } else {
            fill
        }
    })
    .expect("same dimensions")
}
