//! Seven-segment digit recognition for medical monitor photos.
//!
//! The crate is organised along the recognition pipeline:
//!
//! * [`imaging`] turns a photo into normalized 15×45 binary digit bitmaps
//!   (Otsu thresholding, polarity normalization, vertical-projection
//!   segmentation, nearest-neighbour scaling, blur scoring).
//! * [`datagen`] renders labeled seven-segment images and whole corpora.
//! * [`classifiers`] holds the from-scratch random forest and the baseline
//!   classifiers, plus the versioned model file format.
//! * [`evaluation`] computes confusion matrices, F1 scores and PCA
//!   projections and exports them as CSV/JSON.
//! * [`pipeline`] wires the pieces into the single recognition path shared
//!   by the CLI and the HTTP service.

pub mod classifiers;
pub mod datagen;
pub mod evaluation;
pub mod imaging;
pub mod pipeline;

pub use classifiers::{Dataset, ForestModel, Model, Prediction, TrainParams};
pub use imaging::{BinaryImage, Bounds, DigitSample, GrayImage};
pub use pipeline::{DigitPrediction, ReadingPrediction};

/// Number of digit classes (0–9).
pub const NUM_CLASSES: usize = 10;
