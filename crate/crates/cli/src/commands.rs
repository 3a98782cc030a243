use std::fmt;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use sevenseg::classifiers::{
    load_model, save_model, train_model, ClassifierKind, Model, SvmParams, TrainConfig,
};
use sevenseg::datagen::{generate_corpus, read_manifest, CorpusManifest, CorpusSpec, StyleRanges};
use sevenseg::evaluation::{confusion, export_reports, metrics, pca_fit, pca_project};
use sevenseg::imaging::{io, ImagingError, SegmentParams};
use sevenseg::pipeline::{labeled_digits, recognize_gray, RecognizeError, RecognizeOptions};
use sevenseg::{Dataset, TrainParams};
use sevenseg_service::{router, serve as serve_http, shutdown_signal, AppState, ReadingStore};

use crate::{EvalArgs, GenArgs, PredictArgs, ServeArgs, TrainArgs};

/// Bad flags or paths, detected before any work starts. Exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(usage(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

fn open_model(path: &Path) -> Result<Model> {
    require_file(path, "model")?;
    load_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn open_manifest(path: &Path) -> Result<CorpusManifest> {
    require_file(path, "manifest")?;
    Ok(read_manifest(path)?)
}

/// Segments every manifest image into labeled digit vectors, warning about
/// images that had to be skipped.
fn load_digits(manifest: &CorpusManifest) -> Result<Dataset> {
    let out = labeled_digits(manifest, &SegmentParams::default())?;
    for s in &out.skipped {
        tracing::warn!("skipping {}: {}", s.path.display(), s.reason);
    }
    if out.data.is_empty() {
        anyhow::bail!("no usable digits in {}", manifest.manifest_path().display());
    }
    Ok(out.data)
}

pub fn gen(a: GenArgs) -> Result<()> {
    let class_weights = CorpusSpec::preset_weights(&a.weights).ok_or_else(|| {
        usage(format!(
            "unknown --weights {:?}; use uniform or clinical",
            a.weights
        ))
    })?;
    let spec = CorpusSpec {
        count: a.count,
        min_digits: a.min_digits,
        max_digits: a.max_digits,
        class_weights,
        ranges: StyleRanges {
            noise_prob: (a.noise_min, a.noise_max),
            brightness_max: a.brightness,
            slant_max_deg: a.slant,
            thickness: (a.thickness_min, a.thickness_max),
            invert_prob: a.invert_prob,
            ..StyleRanges::default()
        },
        seed: a.seed,
        ..CorpusSpec::default()
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let manifest = generate_corpus(&spec, &a.out)?;
    println!("{}", manifest.manifest_path().display());
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let kind: ClassifierKind = a
        .classifier
        .parse()
        .map_err(|e: sevenseg::classifiers::ClassifierError| usage(e.to_string()))?;
    let cfg = TrainConfig {
        forest: TrainParams {
            n_trees: a.trees,
            features_per_split: a.features_per_split,
            max_depth: a.max_depth,
            min_samples_split: a.min_samples_split,
            seed: a.seed,
        },
        k: a.k,
        svm: SvmParams {
            epochs: a.epochs,
            lambda: a.lambda,
            seed: a.seed,
        },
    };
    cfg.forest
        .validate(sevenseg::imaging::FEATURE_DIM)
        .map_err(|e| usage(e.to_string()))?;
    if !(a.lambda > 0.0 && a.lambda.is_finite()) || a.k == 0 {
        return Err(usage("--lambda must be positive and --k at least 1"));
    }
    let manifest = open_manifest(&a.data)?;

    let started = Instant::now();
    let data = load_digits(&manifest)?;
    let model = train_model(kind, &data, &cfg)?;
    let elapsed = started.elapsed();
    save_model(&model, &a.model).with_context(|| format!("writing {}", a.model.display()))?;
    println!(
        "classifier={} digits={} elapsed_s={:.3} model={}",
        kind,
        data.len(),
        elapsed.as_secs_f64(),
        a.model.display()
    );
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let model = open_model(&a.model)?;
    let manifest = open_manifest(&a.data)?;
    let data = load_digits(&manifest)?;

    let predicted = (0..data.len())
        .map(|i| Ok(model.predict(data.row(i))?.class))
        .collect::<Result<Vec<u8>>>()?;
    let cm = confusion(data.labels(), &predicted)?;
    let report = metrics(&cm)?;
    let rows: Vec<&[f64]> = data.rows().collect();
    let pca = pca_fit(&rows, 3).context("PCA needs at least 4 evaluated digits")?;
    let points = pca_project(&pca, &rows)?;
    export_reports(&cm, &report, &points, data.labels(), &a.report)?;
    println!(
        "digits={} accuracy={:.4} f1_macro={:.4} f1_weighted={:.4} report={}",
        report.samples,
        report.accuracy,
        report.f1_macro,
        report.f1_weighted,
        a.report.display()
    );
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let model = open_model(&a.model)?;
    require_file(&a.image, "image")?;
    let gray = io::read_gray(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    let opts = RecognizeOptions {
        bounds: a.bounds,
        blur_threshold: a.blur_threshold,
        ..RecognizeOptions::default()
    };
    let reading = match recognize_gray(&model, &gray, &opts) {
        Ok(r) => r,
        Err(RecognizeError::Imaging(e @ ImagingError::OutOfBounds { .. })) => {
            return Err(usage(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    if a.json {
        println!("{}", serde_json::to_string(&reading)?);
    } else {
        let conf: Vec<String> = reading
            .per_digit
            .iter()
            .map(|d| format!("{:.3}", d.confidence))
            .collect();
        println!("{}\t{}", reading.digits, conf.join(","));
    }
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<()> {
    if !(a.blur_threshold >= 0.0 && a.blur_threshold.is_finite()) {
        return Err(usage("--blur-threshold must be a nonnegative number"));
    }
    if a.max_upload_bytes == 0 {
        return Err(usage("--max-upload-bytes must be positive"));
    }
    // Everything that can fail on bad input happens before the port is bound.
    let model = open_model(&a.model).map_err(|e| usage(format!("{e:#}")))?;
    let store = ReadingStore::open(&a.readings)?;
    let opts = RecognizeOptions {
        blur_threshold: a.blur_threshold,
        ..RecognizeOptions::default()
    };
    let state = AppState::new(model, opts, store, a.max_upload_bytes);
    let app = router(state.clone(), a.static_dir.as_deref());

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("binding {}:{}", a.host, a.port))?;
        let addr = listener.local_addr()?;
        eprintln!("listening on http://{addr}");
        tracing::info!(readings = %a.readings.display(), readings_loaded = state.store().len(), "service ready");
        serve_http(listener, app, shutdown_signal()).await?;
        anyhow::Ok(())
    })?;
    state.store().flush()?;
    tracing::info!("shut down cleanly");
    Ok(())
}
