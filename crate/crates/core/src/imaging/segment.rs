//! Vertical-projection segmentation and digit normalization.

use super::{
    BinaryImage, Bounds, DigitSample, ImagingError, Raster, Result, BLACK, DIGIT_HEIGHT,
    DIGIT_WIDTH, FEATURE_DIM, WHITE,
};

/// Per-column mean intensity of a binary image.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnProfile {
    pub means: Vec<f64>,
}

pub fn column_profile(img: &BinaryImage) -> ColumnProfile {
    let (w, h) = (img.width(), img.height());
    let mut sums = vec![0u64; w];
    for y in 0..h {
        for (sum, &p) in sums.iter_mut().zip(img.row(y)) {
            *sum += p as u64;
        }
    }
    ColumnProfile {
        means: sums.into_iter().map(|s| s as f64 / h as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    /// A column is a gap when its mean is at least `255 - gap_epsilon`.
    pub gap_epsilon: f64,
    /// Runs narrower than this many columns are dropped.
    pub min_width: usize,
    /// A run is kept only if its darkest column has black coverage of at
    /// least this fraction of the image height. Drops speckle and decimal
    /// points that survive the width filter.
    pub min_peak_fraction: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            gap_epsilon: 5.0,
            min_width: 2,
            min_peak_fraction: 0.1,
        }
    }
}

/// One digit slice together with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub image: BinaryImage,
    /// Location of `image` within the segmented input.
    pub bounds: Bounds,
}

/// Splits a white-background image into digit slices, left to right.
pub fn segment_digits(img: &BinaryImage, params: &SegmentParams) -> Result<Vec<Segment>> {
    let (w, h) = (img.width(), img.height());
    let profile = column_profile(img);
    let gap_level = WHITE as f64 - params.gap_epsilon;
    let min_peak = params.min_peak_fraction * h as f64;

    let mut black_per_col = vec![0usize; w];
    for y in 0..h {
        for (count, &p) in black_per_col.iter_mut().zip(img.row(y)) {
            *count += (p == BLACK) as usize;
        }
    }

    let mut runs = Vec::new();
    let mut start = None;
    for c in 0..=w {
        let is_gap = c == w || profile.means[c] >= gap_level;
        match (is_gap, start) {
            (false, None) => start = Some(c),
            (true, Some(s)) => {
                runs.push(s..c);
                start = None;
            }
            _ => {}
        }
    }

    let segments: Vec<Segment> = runs
        .into_iter()
        .filter(|r| r.len() >= params.min_width)
        .filter(|r| {
            let peak = black_per_col[r.clone()].iter().copied().max().unwrap_or(0);
            peak > 0 && peak as f64 >= min_peak
        })
        .map(|r| {
            let row_has_ink = |y: usize| img.row(y)[r.clone()].contains(&BLACK);
            // The peak filter guarantees at least one black pixel in the run.
            let top = (0..h).find(|&y| row_has_ink(y)).unwrap_or(0);
            let bottom = (0..h).rev().find(|&y| row_has_ink(y)).unwrap_or(h - 1);
            let bounds = Bounds::new(
                r.start as u32,
                top as u32,
                r.len() as u32,
                (bottom - top + 1) as u32,
            );
            Segment {
                image: img.crop(bounds).expect("run lies inside the image"),
                bounds,
            }
        })
        .collect();

    if segments.is_empty() {
        return Err(ImagingError::NoDigitsFound);
    }
    Ok(segments)
}

/// Nearest-neighbour resample of a digit slice to exactly 15×45.
///
/// Target pixel `(tx, ty)` samples source `(tx·w/15, ty·h/45)` with floor
/// division, so the output stays binary.
pub fn normalize_digit(slice: &BinaryImage) -> Result<DigitSample> {
    if slice.black_count() == 0 {
        return Err(ImagingError::EmptySlice);
    }
    let (w, h) = (slice.width(), slice.height());
    let bitmap = BinaryImage::from_fn(DIGIT_WIDTH, DIGIT_HEIGHT, |tx, ty| {
        slice.is_black(tx * w / DIGIT_WIDTH, ty * h / DIGIT_HEIGHT)
    })?;
    DigitSample::new(bitmap, None)
}

/// Row-major flatten with ink as 1 and background as 0.
pub fn to_feature_vector(sample: &DigitSample) -> Vec<f64> {
    let v: Vec<f64> = sample
        .bitmap()
        .pixels()
        .iter()
        .map(|&p| if p == BLACK { 1.0 } else { 0.0 })
        .collect();
    debug_assert_eq!(v.len(), FEATURE_DIM);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> SegmentParams {
        SegmentParams::default()
    }

    #[test]
    fn profile_means() {
        let img = BinaryImage::from_ascii(&[".#.#", ".##.", ".#.#", ".##."]).unwrap();
        let p = column_profile(&img);
        assert_eq!(p.means.len(), 4);
        assert!((p.means[0] - 255.0).abs() < 1e-9);
        assert!((p.means[1] - 0.0).abs() < 1e-9);
        assert!((p.means[2] - 127.5).abs() < 1e-9);
        assert!((p.means[3] - 127.5).abs() < 1e-9);
    }

    #[test]
    fn two_runs_split_by_white_columns() {
        let img = BinaryImage::from_ascii(&["##..##", "#...#.", "##..##"]).unwrap();
        let segs = segment_digits(&img, &params()).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.image.width() == 2));
        assert_eq!(segs[0].bounds, Bounds::new(0, 0, 2, 3));
        assert_eq!(segs[1].bounds, Bounds::new(4, 0, 2, 3));
    }

    #[test]
    fn all_white_has_no_digits() {
        let img = BinaryImage::filled(10, 10, false).unwrap();
        assert_eq!(
            segment_digits(&img, &params()),
            Err(ImagingError::NoDigitsFound)
        );
    }

    #[test]
    fn narrow_runs_are_dropped() {
        let img = BinaryImage::from_ascii(&["#..##", "#..##"]).unwrap();
        let segs = segment_digits(&img, &params()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].bounds.x, 3);
    }

    #[test]
    fn faint_runs_are_dropped() {
        // A 2x2 speck in a 40-row image covers 5% of the height.
        let img = BinaryImage::from_fn(12, 40, |x, y| {
            ((1..3).contains(&x) && (20..22).contains(&y))
                || ((7..10).contains(&x) && (5..35).contains(&y))
        })
        .unwrap();
        let segs = segment_digits(&img, &params()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].bounds, Bounds::new(7, 5, 3, 30));
    }

    #[test]
    fn slices_are_row_trimmed() {
        let img =
            BinaryImage::from_ascii(&["......", ".##...", ".#..##", "....##", "......"]).unwrap();
        let segs = segment_digits(&img, &params()).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].bounds, Bounds::new(1, 1, 2, 2));
        assert_eq!(segs[1].bounds, Bounds::new(4, 2, 2, 2));
        assert_eq!(
            segs[0].image,
            BinaryImage::from_ascii(&["##", "#."]).unwrap()
        );
    }

    #[test]
    fn near_white_columns_count_as_gaps() {
        // One black pixel in a 100-row column: mean 252.45 >= 250.
        let img = BinaryImage::from_fn(5, 100, |x, y| x != 2 || y == 50).unwrap();
        assert_eq!(segment_digits(&img, &params()).unwrap().len(), 2);
        let strict = SegmentParams {
            gap_epsilon: 0.0,
            ..params()
        };
        assert_eq!(segment_digits(&img, &strict).unwrap().len(), 1);
    }

    #[test]
    fn normalize_identity_on_15x45() {
        let img = BinaryImage::from_fn(15, 45, |x, y| (x * 7 + y * 3) % 5 == 0).unwrap();
        assert_eq!(normalize_digit(&img).unwrap().bitmap(), &img);
    }

    #[test]
    fn normalize_uniform_black() {
        let img = BinaryImage::filled(30, 90, true).unwrap();
        assert_eq!(
            normalize_digit(&img).unwrap().bitmap(),
            &BinaryImage::filled(15, 45, true).unwrap()
        );
    }

    #[test]
    fn normalize_right_columns_pattern() {
        // 5x9 with the two rightmost columns black. floor(tx*5/15) >= 3
        // exactly for tx >= 9, so black lands in the rightmost 6 columns.
        let img = BinaryImage::from_fn(5, 9, |x, _| x >= 3).unwrap();
        let out = normalize_digit(&img).unwrap();
        let expected = BinaryImage::from_fn(15, 45, |x, _| x >= 9).unwrap();
        assert_eq!(out.bitmap(), &expected);
    }

    #[test]
    fn normalize_rejects_empty() {
        let img = BinaryImage::filled(4, 4, false).unwrap();
        assert_eq!(normalize_digit(&img), Err(ImagingError::EmptySlice));
    }

    #[test]
    fn feature_vector_convention() {
        let white = DigitSample::new(BinaryImage::filled(15, 45, false).unwrap(), None).unwrap();
        assert_eq!(to_feature_vector(&white), vec![0.0; 675]);
        let black = DigitSample::new(BinaryImage::filled(15, 45, true).unwrap(), None).unwrap();
        assert_eq!(to_feature_vector(&black), vec![1.0; 675]);
        let one = DigitSample::new(
            BinaryImage::from_fn(15, 45, |x, y| x == 0 && y == 0).unwrap(),
            None,
        )
        .unwrap();
        let v = to_feature_vector(&one);
        assert_eq!(v[0], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
    }

    fn arb_slice() -> impl Strategy<Value = BinaryImage> {
        (1usize..40, 1usize..90).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), w * h).prop_map(move |bits| {
                let mut bits = bits;
                bits[0] = true;
                BinaryImage::from_fn(w, h, |x, y| bits[y * w + x]).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(slice in arb_slice()) {
            let once = normalize_digit(&slice).unwrap();
            prop_assume!(once.bitmap().black_count() > 0);
            let twice = normalize_digit(once.bitmap()).unwrap();
            prop_assert_eq!(once, twice);
        }

        /// Laying the slices back out with gap columns and segmenting again
        /// yields the same number of slices.
        #[test]
        fn resegmenting_own_layout(widths in proptest::collection::vec(2usize..8, 1..5), gap in 1usize..4) {
            let h = 12;
            let total: usize = widths.iter().sum::<usize>() + gap * (widths.len() + 1);
            let mut ink = vec![false; total];
            let mut x = gap;
            for w in &widths {
                ink[x..x + w].fill(true);
                x += w + gap;
            }
            let img = BinaryImage::from_fn(total, h, |x, y| ink[x] && (y + x) % 3 != 0).unwrap();
            let segs = segment_digits(&img, &params()).unwrap();
            prop_assert_eq!(segs.len(), widths.len());

            let height = segs.iter().map(|s| s.image.height()).max().unwrap();
            let width: usize = segs.iter().map(|s| s.image.width() + gap).sum::<usize>() + gap;
            let mut relaid = vec![WHITE; width * height];
            let mut x0 = gap;
            for s in &segs {
                for y in 0..s.image.height() {
                    for x in 0..s.image.width() {
                        relaid[y * width + x0 + x] = s.image.get(x, y);
                    }
                }
                x0 += s.image.width() + gap;
            }
            let relaid = BinaryImage::new(width, height, relaid).unwrap();
            prop_assert_eq!(segment_digits(&relaid, &params()).unwrap().len(), segs.len());
        }
    }
}
