//! In-memory fixtures shared by the benchmarks.

use sevenseg::datagen::{render_number, CorpusSpec, StyleRanges};
use sevenseg::imaging::{to_feature_vector, SegmentParams, FEATURE_DIM};
use sevenseg::pipeline::extract_digits;
use sevenseg::{Dataset, GrayImage};

/// Noisy, jittered corpus settings used across the benchmarks.
pub fn noisy_spec(count: usize, seed: u64) -> CorpusSpec {
    CorpusSpec {
        count,
        seed,
        ranges: StyleRanges {
            noise_prob: (0.0, 0.02),
            brightness_max: 40,
            slant_max_deg: 2.0,
            ..StyleRanges::default()
        },
        ..CorpusSpec::default()
    }
}

/// Renders every image of `spec` without touching the filesystem.
pub fn render_images(spec: &CorpusSpec) -> Vec<(String, GrayImage)> {
    (0..spec.count as u64)
        .map(|i| {
            let (label, style) = spec.draw(i);
            let img = render_number(&label, &style).expect("valid style");
            (label, img)
        })
        .collect()
}

/// Segments rendered images into a labeled digit dataset, dropping images
/// whose slice count disagrees with the label.
pub fn digit_dataset(images: &[(String, GrayImage)]) -> Dataset {
    let params = SegmentParams::default();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (label, img) in images {
        let Ok(digits) = extract_digits(img, &params) else {
            continue;
        };
        if digits.len() != label.len() {
            continue;
        }
        for ((_, sample), d) in digits.iter().zip(label.bytes()) {
            features.extend(to_feature_vector(sample));
            labels.push(d - b'0');
        }
    }
    Dataset::new(FEATURE_DIM, features, labels).expect("FEATURE_DIM rows")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic_and_nonempty() {
        let a = digit_dataset(&render_images(&noisy_spec(20, 3)));
        let b = digit_dataset(&render_images(&noisy_spec(20, 3)));
        assert!(a.len() >= 20);
        assert_eq!(a.labels(), b.labels());
    }
}
