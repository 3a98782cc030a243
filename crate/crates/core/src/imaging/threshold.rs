use super::{BinaryImage, GrayImage, ImagingError, Raster, Result, BLACK, WHITE};

/// Converts an interleaved 8-bit RGB buffer to grayscale using BT.601 luma
/// weights, rounding half up.
pub fn to_grayscale(width: usize, height: usize, rgb: &[u8]) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptyImage { width, height });
    }
    if rgb.len() != width * height * 3 {
        return Err(ImagingError::DimensionMismatch {
            width,
            height,
            expected: width * height * 3,
            actual: rgb.len(),
        });
    }
    // Integer weights in thousandths keep the rounding exact.
    let pixels = rgb
        .chunks_exact(3)
        .map(|p| {
            let acc = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
            ((acc + 500) / 1000).min(255) as u8
        })
        .collect();
    GrayImage::new(width, height, pixels)
}

/// Between-class variance of a split, up to the constant factor `1/N²`:
/// `(N·s0 − n0·S)² / (n0·n1)` as an exact fraction. `None` when a class
/// is empty.
fn between_class_key(n0: u64, s0: u64, total_n: u64, total_s: u64) -> Option<(u128, u128)> {
    let n1 = total_n - n0;
    if n0 == 0 || n1 == 0 {
        return None;
    }
    let d = (total_n as u128 * s0 as u128).abs_diff(n0 as u128 * total_s as u128);
    Some((d * d, n0 as u128 * n1 as u128))
}

/// `a/b > c/d` for positive denominators, without overflow.
fn frac_gt(mut a: u128, mut b: u128, mut c: u128, mut d: u128) -> bool {
    // Continued-fraction comparison; each swap flips the direction.
    let mut flipped = false;
    loop {
        let (qa, qc) = (a / b, c / d);
        if qa != qc {
            return (qa > qc) != flipped;
        }
        let (ra, rc) = (a % b, c % d);
        match (ra == 0, rc == 0) {
            (true, true) => return false,
            (true, false) => return flipped,
            (false, true) => return !flipped,
            _ => {}
        }
        (a, b, c, d) = (b, ra, d, rc);
        flipped = !flipped;
    }
}

/// Otsu's global threshold.
///
/// Returns the `t` in `0..=254` maximizing the between-class variance where
/// class 0 holds pixels `<= t`. Ties resolve to the smallest `t`.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8> {
    let mut hist = [0u64; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let first = img.pixels()[0];
    if hist[first as usize] == img.pixels().len() as u64 {
        return Err(ImagingError::UniformImage(first));
    }

    let total_n: u64 = hist.iter().sum();
    let total_s: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();

    let mut n0 = 0u64;
    let mut s0 = 0u64;
    // Splits with an empty class score zero; t = 0 wins if nothing beats it.
    let mut best_t = 0u8;
    let mut best = (0u128, 1u128);
    for (t, &count) in hist.iter().enumerate().take(255) {
        n0 += count;
        s0 += t as u64 * count;
        if let Some((num, den)) = between_class_key(n0, s0, total_n, total_s) {
            if frac_gt(num, den, best.0, best.1) {
                best = (num, den);
                best_t = t as u8;
            }
        }
    }
    Ok(best_t)
}

/// Maps pixels `<= t` to black and the rest to white.
pub fn binarize(img: &GrayImage, t: u8) -> Result<BinaryImage> {
    if t == 255 {
        return Err(ImagingError::InvalidThreshold(t as u16));
    }
    let pixels = img
        .pixels()
        .iter()
        .map(|&p| if p <= t { BLACK } else { WHITE })
        .collect();
    BinaryImage::new(img.width(), img.height(), pixels)
}

/// Inverts the image when strictly more than half of its outermost border
/// pixels are black, so that the background ends up white.
pub fn normalize_polarity(img: &BinaryImage) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut border = 0usize;
    let mut black = 0usize;
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                border += 1;
                if img.is_black(x, y) {
                    black += 1;
                }
            }
        }
    }
    if 2 * black > border {
        img.invert()
    } else {
        img.clone()
    }
}
