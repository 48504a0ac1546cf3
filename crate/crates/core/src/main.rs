use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dataset_quality::data::{
    self, generate_blobs, generate_gaussian, generate_replicated, load_cifar10_binary, load_idx, load_image_directory,
    load_manifest, save_dataset, AugmentationParams, LabeledImageSet,
};
use dataset_quality::harness::{load_plan_file, run_plan};
use dataset_quality::nn::{embed_dataset, init_model, load_model, save_embedded, save_model, train, TrainConfig};
use dataset_quality::report::{emit_report, ChartKind, ReportFormat, ReportSpec};

type CliResult<T = ()> = Result<T, Box<dyn Error>>;

/// Dataset quality assessment: generate or import datasets, train autoencoders, embed,
/// run the tree-complexity grid and render reports.
#[derive(Debug, Parser)]
#[command(name = "dq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create a synthetic dataset or import an existing one as an IDX manifest.
    #[command(subcommand)]
    Generate(Generate),
    /// Train an autoencoder on a dataset manifest.
    TrainAe(TrainAe),
    /// Encode a dataset with a trained autoencoder.
    Embed(Embed),
    /// Execute an experiment plan, appending to its results CSV.
    Run {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Aggregate a results CSV into tables and charts.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "csv,svg")]
        format: Vec<FormatArg>,
        #[arg(long, value_delimiter = ',', default_value = "bars,trends")]
        chart: Vec<ChartArg>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ChartArg {
    Bars,
    Trends,
}

#[derive(Debug, Args)]
struct Output {
    /// Directory receiving `<id>-images.idx`, `<id>-labels.idx` and `<id>.json`.
    #[arg(long)]
    out: PathBuf,
    /// Dataset id; defaults to a name derived from the source.
    #[arg(long)]
    id: Option<String>,
    /// Resample images to HxW, e.g. 32x32.
    #[arg(long, value_parser = parse_size)]
    resize: Option<(usize, usize)>,
}

#[derive(Debug, Subcommand)]
enum Generate {
    /// Pixels from a clamped normal distribution, uniformly random labels.
    Gaussian {
        #[arg(long, default_value_t = 10000)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        height: usize,
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 3)]
        channels: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Well-separated Gaussian class clusters around constant images.
    Blobs {
        #[arg(long, default_value_t = 1000)]
        per_class: usize,
        #[arg(long, default_value_t = 32)]
        height: usize,
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 3)]
        channels: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 0.01)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Augmented copies of a one-image-per-class source dataset.
    Replicated {
        /// Manifest of the source dataset (exactly one RGB image per class).
        #[arg(long)]
        source: PathBuf,
        #[arg(long, default_value_t = 1000)]
        per_class: usize,
        /// JSON file with augmentation ranges; defaults to the built-in ranges.
        #[arg(long)]
        augmentation: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Import an IDX image/label file pair.
    Idx {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Import the CIFAR-10 binary training batches from a directory.
    Cifar {
        #[arg(long)]
        dir: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Import a class-per-subdirectory PNG/JPEG tree.
    Dir {
        #[arg(long)]
        root: PathBuf,
        /// Skip grayscale images instead of replicating them to RGB.
        #[arg(long)]
        drop_non_rgb: bool,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args)]
struct TrainAe {
    /// Dataset manifest.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    bottleneck: usize,
    /// Encoder hidden widths, outermost first, e.g. 512,128.
    #[arg(long, value_delimiter = ',')]
    hidden: Vec<usize>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    #[arg(long, default_value_t = 1e-4)]
    learning_rate: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 3)]
    patience: usize,
    #[arg(long, default_value_t = 500)]
    max_epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct Embed {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Directory receiving `<model_id>-vectors.idx`, labels and manifest.
    #[arg(long)]
    out: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| format!("bad size {s:?}"));
    Ok((parse(h)?, parse(w)?))
}

/// Prefix an error with the path it concerns.
fn at<T, E: Error>(path: &Path, r: Result<T, E>) -> CliResult<T> {
    r.map_err(|e| format!("{}: {e}", path.display()).into())
}

fn save(set: LabeledImageSet, output: &Output) -> CliResult {
    let set = match output.id.as_deref() {
        Some(id) => set.with_id(id),
        None => set,
    };
    let set = match output.resize {
        Some((h, w)) => set.resized(h, w),
        None => set,
    };
    let (path, manifest) = save_dataset(&set, &output.out)?;
    println!(
        "wrote {} ({} images, {}x{}x{}, {} classes, entropy {:.4} bits)",
        path.display(),
        set.len(),
        set.height(),
        set.width(),
        set.channels(),
        manifest.class_names.len(),
        data::entropy(&set.class_distribution()?)
    );
    Ok(())
}

fn generate(cmd: Generate) -> CliResult {
    match cmd {
        Generate::Gaussian { n, height, width, channels, classes, seed, output } => {
            let generated = generate_gaussian(n, height, width, channels, classes, seed)?;
            if generated.label_retries > 0 {
                eprintln!("note: labels redrawn {} time(s) to cover every class", generated.label_retries);
            }
            save(generated.set, &output)
        }
        Generate::Blobs { per_class, height, width, channels, classes, spread, seed, output } => {
            save(generate_blobs(per_class, height, width, channels, classes, spread, seed)?, &output)
        }
        Generate::Replicated { source, per_class, augmentation, seed, output } => {
            let (_, source) = at(&source, load_manifest(&source))?;
            let params: AugmentationParams = match augmentation {
                Some(path) => {
                    let bytes = at(&path, std::fs::read(&path))?;
                    at(&path, serde_json::from_slice(&bytes))?
                }
                None => AugmentationParams::default(),
            };
            save(generate_replicated(&source, per_class, &params, seed)?, &output)
        }
        Generate::Idx { images, labels, output } => {
            let id = images.file_stem().map_or("idx".into(), |s| s.to_string_lossy().into_owned());
            save(load_idx(&images, &labels)?.with_id(id), &output)
        }
        Generate::Cifar { dir, output } => save(load_cifar10_binary(dir)?, &output),
        Generate::Dir { root, drop_non_rgb, output } => {
            let (set, report) = load_image_directory(&root, drop_non_rgb, output.resize)?;
            if report.skipped_non_rgb > 0 {
                eprintln!("note: skipped {} non-RGB image(s)", report.skipped_non_rgb);
            }
            save(set, &output)
        }
    }
}

fn train_ae(args: TrainAe) -> CliResult {
    let (_, set) = at(&args.dataset, load_manifest(&args.dataset))?;
    let (train_set, val_set) = data::split_train_val(&set, args.val_fraction, args.seed)?;
    let model = init_model(set.feature_dim(), args.bottleneck, &args.hidden, args.seed)?;
    let config = TrainConfig {
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        patience_epochs: args.patience,
        max_epochs: args.max_epochs,
        seed: args.seed,
    };
    let (model, history) = train(model, train_set.flattened().view(), val_set.flattened().view(), &config)?;
    let model_id = args.model_id.unwrap_or_else(|| format!("{}-ae{}", set.id(), args.bottleneck));
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    save_model(&args.out, &model, &model_id, Some(&history))?;
    println!(
        "wrote {} ({model_id}: {} epochs, best epoch {}, val MAE {:.6})",
        args.out.display(),
        history.epochs_run(),
        history.best_epoch,
        history.best_val_mae().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn embed(args: Embed) -> CliResult {
    let stored = at(&args.model, load_model(&args.model))?;
    let (_, set) = at(&args.dataset, load_manifest(&args.dataset))?;
    let embedded = embed_dataset(&stored.model, &set, &stored.header.model_id)?;
    let (path, _) = save_embedded(&embedded, &args.out)?;
    println!("wrote {} ({} vectors of width {})", path.display(), embedded.len(), embedded.dim());
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Generate(cmd) => generate(cmd),
        Command::TrainAe(args) => train_ae(args),
        Command::Embed(args) => embed(args),
        Command::Run { plan } => {
            let (plan, catalog) = at(&plan, load_plan_file(&plan))?;
            let summary = run_plan(&plan, &catalog)?;
            println!(
                "wrote {} ({} computed, {} already present)",
                plan.output.display(),
                summary.computed,
                summary.skipped
            );
            Ok(())
        }
        Command::Report { results, out, format, chart } => {
            let spec = ReportSpec {
                results,
                out_dir: out,
                formats: format
                    .into_iter()
                    .map(|f| match f {
                        FormatArg::Csv => ReportFormat::Csv,
                        FormatArg::Svg => ReportFormat::Svg,
                    })
                    .collect(),
                charts: chart
                    .into_iter()
                    .map(|c| match c {
                        ChartArg::Bars => ChartKind::Bars,
                        ChartArg::Trends => ChartKind::Trends,
                    })
                    .collect(),
            };
            for path in emit_report(&spec)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dq: error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
