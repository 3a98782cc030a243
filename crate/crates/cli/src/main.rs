//! `sevenseg`: generate corpora, train and evaluate classifiers, read
//! digits from an image, or run the HTTP service.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sevenseg::Bounds;

#[derive(Parser, Debug)]
#[command(
    name = "sevenseg",
    version,
    about = "Seven-segment digit recognition for medical monitor photos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a labeled synthetic corpus and its manifest.
    Gen(GenArgs),
    /// Train a classifier on the digits of a corpus.
    Train(TrainArgs),
    /// Evaluate a model and write confusion.csv, metrics.json, pca.csv.
    Eval(EvalArgs),
    /// Read the digits in one image.
    Predict(PredictArgs),
    /// Run the HTTP recognition and readings service.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    min_digits: usize,
    #[arg(long, default_value_t = 3)]
    max_digits: usize,
    /// Digit class weights: `uniform` or `clinical`.
    #[arg(long, default_value = "uniform")]
    weights: String,
    #[arg(long, default_value_t = 0.0)]
    noise_min: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_max: f64,
    /// Brightness offsets are drawn from ±this.
    #[arg(long, default_value_t = 0)]
    brightness: i32,
    /// Slant angles in degrees are drawn from ±this.
    #[arg(long, default_value_t = 0.0)]
    slant: f64,
    #[arg(long, default_value_t = 4)]
    thickness_min: u32,
    #[arg(long, default_value_t = 4)]
    thickness_max: u32,
    /// Probability of light digits on a dark background.
    #[arg(long, default_value_t = 0.0)]
    invert_prob: f64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Corpus manifest (manifest.tsv).
    #[arg(long)]
    data: PathBuf,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "forest", value_parser = ["forest", "tree", "knn", "nb", "svm"])]
    classifier: String,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Features sampled per split; defaults to ⌈√d⌉.
    #[arg(long)]
    features_per_split: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    min_samples_split: usize,
    /// Neighbours for `--classifier knn`.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// SVM epochs.
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// SVM regularization.
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Report directory; created if absent.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// PNG or binary PGM image.
    image: PathBuf,
    /// Crop rectangle `x,y,w,h` applied before recognition.
    #[arg(long)]
    bounds: Option<Bounds>,
    #[arg(long, default_value_t = 0.0)]
    blur_threshold: f64,
    /// Print the full prediction as JSON instead of the summary line.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, env = "SEVENSEG_MODEL")]
    model: PathBuf,
    #[arg(long, env = "SEVENSEG_PORT", default_value_t = sevenseg_service::DEFAULT_PORT)]
    port: u16,
    #[arg(long, env = "SEVENSEG_HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "SEVENSEG_READINGS", default_value = "readings.jsonl")]
    readings: PathBuf,
    /// Minimum blur score; 0 disables the gate.
    #[arg(long, env = "SEVENSEG_BLUR_THRESHOLD", default_value_t = 0.0)]
    blur_threshold: f64,
    #[arg(long, env = "SEVENSEG_MAX_UPLOAD_BYTES", default_value_t = sevenseg_service::DEFAULT_MAX_UPLOAD_BYTES)]
    max_upload_bytes: usize,
    /// Directory with the web UI bundle, served at `/`.
    #[arg(long, env = "SEVENSEG_STATIC_DIR")]
    static_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let verbose = matches!(cli.command, Command::Serve(_));
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .with_max_level(if verbose {
            tracing::Level::INFO
        } else {
            tracing::Level::WARN
        })
        .init();

    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<commands::UsageError>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
