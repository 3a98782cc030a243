use super::{GrayImage, ImagingError, Raster, Result};

/// Variance of the 4-neighbour Laplacian over interior pixels.
/// Low values mean a blurry image.
pub fn blur_score(img: &GrayImage) -> Result<f64> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(ImagingError::ImageTooSmall {
            width: w,
            height: h,
        });
    }
    let p = |x: usize, y: usize| img.get(x, y) as f64;
    let n = ((w - 2) * (h - 2)) as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let l = 4.0 * p(x, y) - p(x - 1, y) - p(x + 1, y) - p(x, y - 1) - p(x, y + 1);
            sum += l;
            sum_sq += l * l;
        }
    }
    let mean = sum / n;
    Ok((sum_sq / n - mean * mean).max(0.0))
}

/// 3×3 mean filter with edge replication; output has the input's size.
pub fn box_blur(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    GrayImage::from_fn(w, h, |x, y| {
        let mut acc = 0u32;
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                acc += img.get(clamp(x as isize + dx, w), clamp(y as isize + dy, h)) as u32;
            }
        }
        ((acc + 4) / 9) as u8
    })
    .expect("same dimensions as a valid image")
}
