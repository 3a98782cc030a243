//! The one recognition path used by both the CLI and the HTTP service,
//! plus labeled-digit extraction for training and evaluation.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{ClassifierError, Dataset, Model};
use crate::datagen::{parse_label, CorpusManifest};
use crate::imaging::{
    binarize, blur_score, io, normalize_digit, normalize_polarity, otsu_threshold, segment_digits,
    to_feature_vector, DigitSample, ImagingError, Raster, SegmentParams, FEATURE_DIM,
};
use crate::{Bounds, GrayImage};

/// Readings carry at most this many digits.
pub const MAX_DIGITS: usize = 3;

#[derive(Debug, Error)]
pub enum RecognizeError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("image too blurry: score {score:.1} is below threshold {threshold}")]
    Blurry { score: f64, threshold: f64 },
    #[error("no digits found")]
    NoDigits,
    #[error("found {0} digits; a reading has at most 3")]
    TooManyDigits(usize),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

pub type Result<T, E = RecognizeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct RecognizeOptions {
    /// Crop applied before anything else.
    pub bounds: Option<Bounds>,
    /// Reject images whose blur score is below this; 0 disables the gate.
    pub blur_threshold: f64,
    pub segment: SegmentParams,
}

impl Default for RecognizeOptions {
    fn default() -> Self {
        Self {
            bounds: None,
            blur_threshold: 0.0,
            segment: SegmentParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitPrediction {
    pub char: char,
    pub confidence: f64,
    pub vote_counts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingPrediction {
    pub digits: String,
    pub per_digit: Vec<DigitPrediction>,
    /// Digit boxes relative to the (cropped) input.
    pub boxes: Vec<Bounds>,
    pub blur_score: f64,
}

/// Otsu → binarize → polarity → segment → normalize, left to right.
pub fn extract_digits(
    gray: &GrayImage,
    params: &SegmentParams,
) -> Result<Vec<(Bounds, DigitSample)>> {
    let t = match otsu_threshold(gray) {
        Ok(t) => t,
        Err(ImagingError::UniformImage(_)) => return Err(RecognizeError::NoDigits),
        Err(e) => return Err(e.into()),
    };
    let binary = normalize_polarity(&binarize(gray, t)?);
    let segments = match segment_digits(&binary, params) {
        Ok(s) => s,
        Err(ImagingError::NoDigitsFound) => return Err(RecognizeError::NoDigits),
        Err(e) => return Err(e.into()),
    };
    segments
        .into_iter()
        .map(|s| Ok((s.bounds, normalize_digit(&s.image)?)))
        .collect()
}

pub fn recognize_gray(
    model: &Model,
    gray: &GrayImage,
    opts: &RecognizeOptions,
) -> Result<ReadingPrediction> {
    let cropped;
    let gray = match opts.bounds {
        Some(b) => {
            cropped = gray.crop(b)?;
            &cropped
        }
        None => gray,
    };
    // Images too small for the Laplacian score zero.
    let score = blur_score(gray).unwrap_or(0.0);
    if opts.blur_threshold > 0.0 && score < opts.blur_threshold {
        return Err(RecognizeError::Blurry {
            score,
            threshold: opts.blur_threshold,
        });
    }

    let digits = extract_digits(gray, &opts.segment)?;
    if digits.len() > MAX_DIGITS {
        return Err(RecognizeError::TooManyDigits(digits.len()));
    }
    let mut out = ReadingPrediction {
        digits: String::with_capacity(digits.len()),
        per_digit: Vec::with_capacity(digits.len()),
        boxes: Vec::with_capacity(digits.len()),
        blur_score: score,
    };
    for (bounds, sample) in digits {
        let p = model.predict(&to_feature_vector(&sample))?;
        let c = char::from(b'0' + p.class);
        out.digits.push(c);
        out.per_digit.push(DigitPrediction {
            char: c,
            confidence: p.confidence,
            vote_counts: p.votes,
        });
        out.boxes.push(bounds);
    }
    Ok(out)
}

/// Decodes PNG/PGM bytes and recognizes them.
pub fn recognize_bytes(
    model: &Model,
    bytes: &[u8],
    opts: &RecognizeOptions,
) -> Result<ReadingPrediction> {
    recognize_gray(model, &io::decode_gray(bytes)?, opts)
}

#[derive(Debug, Error)]
#[error("reading {}", path.display())]
pub struct LoadError {
    pub path: PathBuf,
    #[source]
    pub source: ImagingError,
}

/// A manifest image that contributed no digits.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LabeledDigits {
    pub data: Dataset,
    pub images_used: usize,
    pub skipped: Vec<Skipped>,
}

/// Segments every manifest image and pairs slices with label characters
/// positionally. Images whose slice count differs from the label length
/// (or that have no digits at all) are skipped and reported. Unreadable
/// images are an error.
pub fn labeled_digits(
    manifest: &CorpusManifest,
    params: &SegmentParams,
) -> Result<LabeledDigits, LoadError> {
    let per_image: Vec<std::result::Result<Vec<Vec<f64>>, Skipped>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let path = manifest.resolve(entry);
            let gray = io::read_gray(&path).map_err(|source| LoadError {
                path: path.clone(),
                source,
            })?;
            let skip = |reason: String| Skipped {
                path: path.clone(),
                reason,
            };
            let labels = parse_label(&entry.label).ok_or_else(|| LoadError {
                path: path.clone(),
                source: ImagingError::Decode(format!("bad label {:?}", entry.label)),
            })?;
            Ok(match extract_digits(&gray, params) {
                Ok(d) if d.len() == labels.len() => {
                    Ok(d.iter().map(|(_, s)| to_feature_vector(s)).collect())
                }
                Ok(d) => Err(skip(format!(
                    "found {} digits, label {:?} has {}",
                    d.len(),
                    entry.label,
                    labels.len()
                ))),
                Err(e) => Err(skip(e.to_string())),
            })
        })
        .collect::<Result<_, LoadError>>()?;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut skipped = Vec::new();
    let mut images_used = 0;
    for (entry, result) in manifest.entries.iter().zip(per_image) {
        match result {
            Ok(vectors) => {
                images_used += 1;
                for (v, d) in vectors.into_iter().zip(entry.label.bytes()) {
                    features.extend(v);
                    labels.push(d - b'0');
                }
            }
            Err(s) => skipped.push(s),
        }
    }
    let data = Dataset::new(FEATURE_DIM, features, labels)
        .expect("feature vectors have FEATURE_DIM entries");
    Ok(LabeledDigits {
        data,
        images_used,
        skipped,
    })
}
