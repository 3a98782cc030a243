use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ConfusionMatrix, EvaluationError, MetricsReport, Result};
use crate::NUM_CLASSES;

pub const CONFUSION_FILE: &str = "confusion.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const PCA_FILE: &str = "pca.csv";

fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = String::from("true\\pred");
    for k in 0..NUM_CLASSES {
        let _ = write!(out, ",{k}");
    }
    out.push('\n');
    for (t, row) in cm.counts.iter().enumerate() {
        let _ = write!(out, "{t}");
        for c in row {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
    }
    out
}

fn pca_csv(points: &[Vec<f64>], labels: &[u8]) -> String {
    let k = points.first().map_or(3, Vec::len);
    let mut out = (1..=k)
        .map(|i| format!("pc{i}"))
        .collect::<Vec<_>>()
        .join(",");
    out.push_str(",label\n");
    for (p, l) in points.iter().zip(labels) {
        for v in p {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{l}");
    }
    out
}

/// Writes `confusion.csv`, `metrics.json` and `pca.csv` into `out_dir`,
/// creating it if needed.
pub fn export_reports(
    cm: &ConfusionMatrix,
    metrics: &MetricsReport,
    pca_points: &[Vec<f64>],
    labels: &[u8],
    out_dir: &Path,
) -> Result<()> {
    if pca_points.len() != labels.len() {
        return Err(EvaluationError::LengthMismatch {
            truth: labels.len(),
            predicted: pca_points.len(),
        });
    }
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| EvaluationError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut json = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    json.push('\n');
    for (name, body) in [
        (CONFUSION_FILE, confusion_csv(cm)),
        (METRICS_FILE, json),
        (PCA_FILE, pca_csv(pca_points, labels)),
    ] {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
    }
    Ok(())
}
