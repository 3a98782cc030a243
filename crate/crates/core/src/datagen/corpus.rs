//! Labeled corpus generation and the tab-separated manifest format.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{parse_label, render_number, DatagenError, RenderStyle, Result};
use crate::imaging::io::encode_png;

pub const MANIFEST_FILE: &str = "manifest.tsv";

/// Per-image randomization ranges (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleRanges {
    pub noise_prob: (f64, f64),
    /// Brightness offset drawn from `-brightness_max..=brightness_max`.
    pub brightness_max: i32,
    /// Slant angle drawn from `±slant_max_deg`; the shear is its tangent.
    pub slant_max_deg: f64,
    pub thickness: (u32, u32),
    pub fg: (u8, u8),
    pub bg: (u8, u8),
    /// Probability of swapping fg and bg (light digits on a dark panel).
    pub invert_prob: f64,
}

impl Default for StyleRanges {
    fn default() -> Self {
        Self {
            noise_prob: (0.0, 0.0),
            brightness_max: 0,
            slant_max_deg: 0.0,
            thickness: (4, 4),
            fg: (30, 30),
            bg: (230, 230),
            invert_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub count: usize,
    pub min_digits: usize,
    pub max_digits: usize,
    pub class_weights: [f64; 10],
    /// Fixed geometry (cell size, gap, margin); per-image fields are
    /// overwritten from `ranges`.
    pub base_style: RenderStyle,
    pub ranges: StyleRanges,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            count: 100,
            min_digits: 1,
            max_digits: 3,
            class_weights: Self::UNIFORM,
            base_style: RenderStyle::default(),
            ranges: StyleRanges::default(),
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub const UNIFORM: [f64; 10] = [0.1; 10];
    /// Leading 1s and 2s dominate blood pressure and weight readings.
    pub const CLINICAL: [f64; 10] = [
        0.075, 0.25, 0.15, 0.075, 0.075, 0.075, 0.075, 0.075, 0.075, 0.075,
    ];

    pub fn preset_weights(name: &str) -> Option<[f64; 10]> {
        match name {
            "uniform" => Some(Self::UNIFORM),
            "clinical" => Some(Self::CLINICAL),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DatagenError::InvalidSpec(m));
        if !(1 <= self.min_digits && self.min_digits <= self.max_digits && self.max_digits <= 3) {
            return bad(format!(
                "digits per image {}..={} outside 1..=3",
                self.min_digits, self.max_digits
            ));
        }
        if self
            .class_weights
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return bad("class weights must be nonnegative".into());
        }
        let sum: f64 = self.class_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("class weights sum to {sum}, not 1"));
        }
        let r = &self.ranges;
        if !(0.0 <= r.noise_prob.0 && r.noise_prob.0 <= r.noise_prob.1 && r.noise_prob.1 <= 1.0) {
            return bad(format!("noise range {:?}", r.noise_prob));
        }
        if !(0..=60).contains(&r.brightness_max) {
            return bad(format!(
                "brightness_max {} outside 0..=60",
                r.brightness_max
            ));
        }
        if !(0.0..45.0).contains(&r.slant_max_deg) {
            return bad(format!("slant_max_deg {} outside [0, 45)", r.slant_max_deg));
        }
        if r.thickness.0 > r.thickness.1 || r.fg.0 > r.fg.1 || r.bg.0 > r.bg.1 {
            return bad("inverted range".into());
        }
        if r.fg.1 >= r.bg.0 {
            return bad("fg range must lie strictly below bg range".into());
        }
        if !(0.0..=1.0).contains(&r.invert_prob) {
            return bad(format!("invert_prob {}", r.invert_prob));
        }
        // Checks the extreme thickness against the fixed geometry.
        RenderStyle {
            thickness: r.thickness.1,
            ..self.base_style.clone()
        }
        .validate()?;
        RenderStyle {
            thickness: r.thickness.0,
            ..self.base_style.clone()
        }
        .validate()
    }

    /// Draws the label and style of image `index`. Depends only on
    /// `(seed, index)`.
    pub fn draw(&self, index: u64) -> (String, RenderStyle) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let weights = WeightedIndex::new(self.class_weights).expect("validated weights");
        let n = rng.random_range(self.min_digits..=self.max_digits);
        let label: String = (0..n)
            .map(|_| char::from(b'0' + weights.sample(&mut rng) as u8))
            .collect();

        let r = &self.ranges;
        let mut style = self.base_style.clone();
        style.noise_prob = if r.noise_prob.0 < r.noise_prob.1 {
            rng.random_range(r.noise_prob.0..=r.noise_prob.1)
        } else {
            r.noise_prob.0
        };
        style.brightness_offset = rng.random_range(-r.brightness_max..=r.brightness_max);
        let slant = if r.slant_max_deg > 0.0 {
            rng.random_range(-r.slant_max_deg..=r.slant_max_deg)
        } else {
            0.0
        };
        style.slant_shear = slant.to_radians().tan();
        style.thickness = rng.random_range(r.thickness.0..=r.thickness.1);
        style.fg = rng.random_range(r.fg.0..=r.fg.1);
        style.bg = rng.random_range(r.bg.0..=r.bg.1);
        if rng.random_bool(r.invert_prob) {
            std::mem::swap(&mut style.fg, &mut style.bg);
        }
        style.seed = rng.random();
        (label, style)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub label: String,
    /// Render parameters, when known. Not stored in the manifest file.
    pub style: Option<RenderStyle>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    /// Directory that entry paths are relative to.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn digit_count(&self) -> usize {
        self.entries.iter().map(|e| e.label.len()).sum()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Renders `spec.count` PNGs into `out_dir` and writes `manifest.tsv`.
/// Output bytes are reproducible from the spec alone.
pub fn generate_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<CorpusManifest> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let entries = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let (label, style) = spec.draw(i as u64);
            let img = render_number(&label, &style)?;
            let rel = PathBuf::from(format!("img_{i:05}.png"));
            let path = out_dir.join(&rel);
            fs::write(&path, encode_png(&img)).map_err(io_err(&path))?;
            Ok(ManifestEntry {
                path: rel,
                label,
                style: Some(style),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = CorpusManifest {
        root: out_dir.to_path_buf(),
        entries,
    };
    write_manifest(&manifest)?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &CorpusManifest) -> Result<()> {
    let path = manifest.manifest_path();
    let mut out = Vec::new();
    for e in &manifest.entries {
        writeln!(out, "{}\t{}", e.path.display(), e.label).expect("write to Vec");
    }
    fs::write(&path, out).map_err(io_err(&path))
}

/// Reads a manifest file. Entry paths stay relative to its directory.
pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: &str| DatagenError::Manifest {
            line: i + 1,
            reason: reason.to_string(),
        };
        let mut cols = line.split('\t');
        let (Some(p), Some(label)) = (cols.next(), cols.next()) else {
            return Err(err("expected path<TAB>label"));
        };
        if p.is_empty() {
            return Err(err("empty path"));
        }
        if parse_label(label).is_none() {
            return Err(err("label must be 1-3 digits"));
        }
        entries.push(ManifestEntry {
            path: PathBuf::from(p),
            label: label.to_string(),
            style: None,
        });
    }
    Ok(CorpusManifest { root, entries })
}
