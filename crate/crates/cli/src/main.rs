//! Command line front end for the histopathology classification pipeline.
//!
//! Five subcommands cover the workflow: `scan` builds a dataset manifest,
//! `extract` warms the feature cache, `run` executes a configured experiment,
//! `report` renders tables and plots from a finished run, and `predict`
//! classifies a single image with a saved ensemble bundle.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 model error,
//! 5 internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use histoml_core::data::{DatasetManifest, LabelMap, Normalization, PreprocessConfig};
use histoml_core::experiment::{
    emit_report, load_result, predict_single, run_experiment, ExperimentConfig,
};
use histoml_core::features::{
    extract_features, load_features, store_features, BackboneId, BackboneSpec, CacheKey,
};
use histoml_core::{data::scan_dataset, Error, ErrorClass};

/// Environment variable overriding the feature cache root.
const CACHE_ENV: &str = "HISTOML_CACHE_DIR";

#[derive(Parser)]
#[command(
    name = "histoml",
    version,
    about = "Deep-feature ensemble pipeline for histopathology images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Walk a class-per-directory image tree and write a dataset manifest.
    Scan(ScanArgs),
    /// Extract deep features for a scanned dataset into the cache.
    Extract(ExtractArgs),
    /// Run the full experiment described by a config file.
    Run(RunArgs),
    /// Render report tables and plots from a finished run.
    Report(ReportArgs),
    /// Classify a single image with a saved ensemble bundle.
    Predict(PredictArgs),
}

#[derive(Args)]
struct ScanArgs {
    /// Dataset root containing one subdirectory per class.
    #[arg(long)]
    root: PathBuf,
    /// Comma separated class directory names, in label id order.
    #[arg(long, value_delimiter = ',', required = true)]
    classes: Vec<String>,
    /// Where to write the manifest.
    #[arg(long, default_value = "manifest.json")]
    output: PathBuf,
    /// Where to write the skip report. Defaults to the manifest path with a
    /// `.skips.jsonl` extension; only written when files were skipped.
    #[arg(long)]
    skips: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    /// Manifest produced by `scan`.
    #[arg(long)]
    manifest: PathBuf,
    /// Backbone to extract with (vgg16, vgg19, mobilenet, densenet169,
    /// densenet201, or mock).
    #[arg(long)]
    backbone: String,
    /// ONNX graph for CNN backbones. The mock backbone takes none.
    #[arg(long)]
    model_path: Option<PathBuf>,
    /// Feature cache root. Falls back to HISTOML_CACHE_DIR, then `cache`.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Resize width fed to the backbone.
    #[arg(long, default_value_t = 128)]
    width: usize,
    /// Resize height fed to the backbone.
    #[arg(long, default_value_t = 128)]
    height: usize,
    /// Pixel normalization: none or imagenet.
    #[arg(long, default_value = "none")]
    normalization: String,
    /// Images decoded and extracted per batch.
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory a `run` wrote its result into.
    #[arg(long)]
    result_dir: PathBuf,
    /// Where to write the report files. Defaults to `<result-dir>/report`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Bundle directory saved by `run`.
    #[arg(long)]
    bundle: PathBuf,
    /// Image to classify.
    #[arg(long)]
    image: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Scan(args) => scan(args),
        Command::Extract(args) => extract(args),
        Command::Run(args) => run(args),
        Command::Report(args) => report(args),
        Command::Predict(args) => predict(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(err.class()))
        }
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Model => 4,
        ErrorClass::Internal => 5,
    }
}

fn env_cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn scan(args: ScanArgs) -> Result<(), Error> {
    let label_map = LabelMap::from_names(args.classes.clone())?;
    let (manifest, skips) = scan_dataset(&args.root, &label_map)?;
    manifest.save(&args.output)?;
    println!(
        "scanned {} samples across {} classes",
        manifest.len(),
        label_map.n_classes()
    );
    println!("manifest written to {}", args.output.display());
    if !skips.records.is_empty() {
        let path = args
            .skips
            .unwrap_or_else(|| args.output.with_extension("skips.jsonl"));
        skips.write_jsonl(&path)?;
        println!(
            "skipped {} unreadable files, details in {}",
            skips.records.len(),
            path.display()
        );
    }
    Ok(())
}

fn parse_normalization(s: &str) -> Result<Normalization, Error> {
    match s {
        "none" => Ok(Normalization::None),
        "imagenet" => Ok(Normalization::Imagenet),
        other => Err(Error::Config(format!(
            "unknown normalization {other:?}, expected none or imagenet"
        ))),
    }
}

fn extract(args: ExtractArgs) -> Result<(), Error> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let backbone_id: BackboneId = args.backbone.parse()?;
    let spec = match (backbone_id, args.model_path) {
        (BackboneId::Mock, None) => BackboneSpec::mock(),
        (BackboneId::Mock, Some(_)) => {
            return Err(Error::Config(
                "the mock backbone takes no --model-path".into(),
            ))
        }
        (id, Some(path)) => BackboneSpec::onnx(id, path),
        (id, None) => {
            return Err(Error::Config(format!(
                "backbone {id} needs --model-path pointing at its ONNX graph"
            )))
        }
    };
    let preprocess = PreprocessConfig {
        width: args.width,
        height: args.height,
        normalization: parse_normalization(&args.normalization)?,
    };
    preprocess.validate()?;
    let cache_dir = args
        .cache_dir
        .or_else(env_cache_dir)
        .unwrap_or_else(|| PathBuf::from("cache"));

    let key = CacheKey {
        dataset_id: manifest.dataset_id.clone(),
        backbone_id,
        preprocess_hash: preprocess.hash(),
    };
    if let Ok(cached) = load_features(&key, &cache_dir) {
        println!(
            "cache hit: {} samples x {} features at {}",
            cached.n_samples(),
            cached.feature_dim(),
            key.dir(&cache_dir).display()
        );
        return Ok(());
    }

    let backbone = spec.load()?;
    let matrix = extract_features(backbone.as_ref(), &manifest, &preprocess, args.batch_size)?;
    let key = store_features(&matrix, &cache_dir)?;
    println!(
        "extracted {} samples x {} features into {}",
        matrix.n_samples(),
        matrix.feature_dim(),
        key.dir(&cache_dir).display()
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<(), Error> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(dir) = env_cache_dir() {
        config.cache_dir = dir;
    }
    if let Some(dir) = args.output_dir {
        config.output_dir = dir;
    }
    let result = run_experiment(&config)?;
    let selected: Vec<&str> = result
        .selection
        .selected
        .iter()
        .map(|id| id.display_name())
        .collect();
    println!("selected classifiers: {}", selected.join(", "));
    println!(
        "chosen backbone {} with {} voting, accuracy {:.4}",
        result.chosen_backbone, result.chosen_mode, result.final_metrics.accuracy
    );
    println!("result written to {}", config.output_dir.display());
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), Error> {
    let result = load_result(&args.result_dir)?;
    let out = args
        .output
        .unwrap_or_else(|| args.result_dir.join("report"));
    let manifest = emit_report(&result, &out)?;
    println!(
        "wrote {} report files to {}",
        manifest.files.len(),
        out.display()
    );
    Ok(())
}

fn predict(args: PredictArgs) -> Result<(), Error> {
    let prediction = predict_single(&args.bundle, &args.image)?;
    let line = serde_json::to_string(&prediction).map_err(|e| Error::Json {
        context: "prediction output".into(),
        source: e,
    })?;
    println!("{line}");
    Ok(())
}
