use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use meshgcn::datasets::SplitRule;
use meshgcn::geometry::{CurvatureArea, FeatureMask, FeatureOptions};
use meshgcn::graph::Aggregation;
use meshgcn::models::{ModelConfig, Task};
use meshgcn::nn::Activation;
use meshgcn_cli::commands::{self, AblationAxis, SynthKind};
use meshgcn_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "meshgcn", version, about = "Graph convolutional networks on triangle-mesh face graphs")]
struct Cli {
    /// Log per-epoch progress and warnings.
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Worker threads for feature extraction and training.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct FeatureArgs {
    /// Feature components, e.g. `P,Nv,GC,Nf,Theta`.
    #[arg(long)]
    mask: Option<FeatureMask>,
    /// Skip centering and unit-radius scaling of input meshes.
    #[arg(long)]
    no_normalize_mesh: bool,
    /// Divide angular deficits by a third of the incident area.
    #[arg(long)]
    curvature_third_area: bool,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record the run as deterministic. Results are bitwise reproducible for any thread count.
    #[arg(long)]
    deterministic: bool,
    #[command(flatten)]
    features: FeatureArgs,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    /// Aggregate with the raw neighbor sum instead of the symmetric normalization.
    #[arg(long)]
    literal_eq5: bool,
    #[arg(long, value_parser = parse_activation)]
    activation: Option<Activation>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Standardize feature columns with statistics from the training items.
    #[arg(long)]
    standardize: bool,
    /// Count an edge as correct when either adjacent face is correct.
    #[arg(long)]
    soft_edge_acc: bool,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, conflicts_with = "train_fraction")]
    train_per_class: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Directory holding `train.txt` and `test.txt`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write per-mesh feature dumps and adjacency sidecars.
    Extract {
        #[arg(long, value_parser = parse_task, default_value = "classification")]
        task: Task,
        dataset: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Train on a dataset; writes config, metrics log, checkpoints and results.
    Train(RunArgs),
    /// Score a checkpoint on a dataset.
    Eval {
        checkpoint: PathBuf,
        dataset: PathBuf,
        /// Manifest listing the items to score.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        soft_edge_acc: bool,
    },
    /// Color a mesh by predicted segment.
    ExportSeg {
        checkpoint: PathBuf,
        mesh: PathBuf,
        /// Ground-truth labels; adds a `.diff.ply` agreement file.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Output path without extension.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Sweep feature masks or hidden widths.
    Ablate {
        #[arg(long, value_enum)]
        axis: AblationAxis,
        /// Comma-separated row indices to run.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<usize>>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write seeded train/test manifests.
    Splits {
        #[arg(long, value_parser = parse_task, default_value = "classification")]
        task: Task,
        dataset: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, conflicts_with = "train_fraction")]
        train_per_class: Option<usize>,
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        out: PathBuf,
        /// Meshes per class for classification, meshes for segmentation.
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the layer table and parameter count.
    Arch {
        #[arg(long, value_parser = parse_task, default_value = "classification")]
        task: Task,
        #[arg(long)]
        classes: usize,
        #[arg(long, default_value_t = 1024)]
        tau: usize,
        #[arg(long)]
        blocks: Option<usize>,
        #[arg(long)]
        mask: Option<FeatureMask>,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    match s {
        "classification" | "cls" => Ok(Task::Classification),
        "segmentation" | "seg" => Ok(Task::Segmentation),
        _ => Err(format!("unknown task {s:?}; use classification or segmentation")),
    }
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    match s {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        _ => Err(format!("unknown activation {s:?}; use relu or tanh")),
    }
}

fn split_rule(per_class: Option<usize>, fraction: Option<f64>) -> Result<Option<SplitRule>> {
    Ok(match (per_class, fraction) {
        (Some(n), None) => Some(SplitRule::PerClass(n)),
        (None, Some(f)) => {
            if !(f > 0.0 && f < 1.0) {
                bail!("--train-fraction must lie strictly between 0 and 1, got {f}");
            }
            Some(SplitRule::Fraction(f))
        }
        (None, None) => None,
        (Some(_), Some(_)) => bail!("--train-per-class and --train-fraction are exclusive"),
    })
}

impl FeatureArgs {
    fn apply(&self, options: &mut FeatureOptions) {
        if let Some(m) = self.mask {
            options.mask = m;
        }
        if self.no_normalize_mesh {
            options.normalize_mesh = false;
        }
        if self.curvature_third_area {
            options.curvature_area = CurvatureArea::IncidentThird;
        }
    }
}

impl RunArgs {
    fn resolve(&self, threads: Option<usize>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value {
                    cfg.$field = v;
                }
            };
        }
        set!(task, self.task);
        set!(dataset, self.dataset.clone());
        set!(output, self.output.clone());
        set!(seed, self.seed);
        set!(mask, self.features.mask);
        set!(tau, self.tau);
        set!(activation, self.activation);
        set!(dropout, self.dropout);
        set!(epochs, self.epochs);
        set!(repeats, self.repeats);
        set!(split, split_rule(self.train_per_class, self.train_fraction)?);
        if self.blocks.is_some() {
            cfg.blocks = self.blocks;
        }
        if self.classes.is_some() {
            cfg.classes = self.classes;
        }
        if self.batch_size.is_some() {
            cfg.batch_size = self.batch_size;
        }
        if self.manifest.is_some() {
            cfg.manifest = self.manifest.clone();
        }
        if threads.is_some() {
            cfg.threads = threads;
        }
        if let Some(lr) = self.lr {
            cfg.adam.lr = lr;
        }
        cfg.deterministic |= self.deterministic;
        cfg.normalize_mesh &= !self.features.no_normalize_mesh;
        if self.features.curvature_third_area {
            cfg.curvature_area = CurvatureArea::IncidentThird;
        }
        if self.literal_eq5 {
            cfg.aggregation = Aggregation::NeighborSum;
        }
        cfg.standardize |= self.standardize;
        cfg.soft_edge_accuracy |= self.soft_edge_acc;
        if cfg.dataset.as_os_str().is_empty() {
            bail!("no dataset given; pass --dataset or set it in --config");
        }
        Ok(cfg)
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    match threads {
        Some(0) => bail!("--threads must be positive"),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?),
        None => Ok(()),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Extract { task, dataset, out, features } => {
            let mut options = FeatureOptions::default();
            features.apply(&mut options);
            let summary = commands::cmd_extract(task, &dataset, options, &out)?;
            print_json(&summary)?;
            if !summary.failures.is_empty() {
                eprintln!("{} mesh(es) failed; see summary.json", summary.failures.len());
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Train(args) => {
            let cfg = args.resolve(cli.threads)?;
            let report = commands::cmd_train(&cfg)?;
            for s in &report.splits {
                println!(
                    "split {}: best test accuracy {} at epoch {} (checkpoint {})",
                    s.split,
                    s.best_test_accuracy.map_or("-".into(), |a| format!("{:.4}", a)),
                    s.best_epoch.map_or("-".into(), |e| e.to_string()),
                    s.checkpoint.display()
                );
            }
            if let Some(m) = report.mean_best_test_accuracy {
                println!("mean best test accuracy over {} split(s): {m:.4}", report.splits.len());
            }
            println!("reported accuracy: {}", report.selection);
            println!("trainable parameters: {}", report.parameters.configured);
            if let Some(note) = &report.parameters.note {
                println!("note: {note}");
            }
            println!("results: {}", cfg.output.join("results.json").display());
        }
        Command::Eval { checkpoint, dataset, split, soft_edge_acc } => {
            let report = commands::cmd_eval(&checkpoint, &dataset, split.as_deref(), soft_edge_acc)?;
            print_json(&report)?;
        }
        Command::ExportSeg { checkpoint, mesh, labels, out } => {
            let report = commands::cmd_export_seg(&checkpoint, &mesh, labels.as_deref(), &out)?;
            println!("wrote {}", report.labels_file.display());
            if let Some(d) = &report.difference_file {
                println!("wrote {}", d.display());
            }
            if let Some(a) = report.face_accuracy {
                println!("face accuracy {a:.4}");
            }
        }
        Command::Ablate { axis, only, run } => {
            let cfg = run.resolve(cli.threads)?;
            let report = commands::cmd_ablate(&cfg, axis, only.as_deref())?;
            print!("{}", report.table());
        }
        Command::Splits { task, dataset, out, seed, repeats, train_per_class, train_fraction } => {
            let rule = split_rule(train_per_class, train_fraction)?.unwrap_or(SplitRule::Fraction(0.8));
            let splits = commands::cmd_splits(task, &dataset, rule, repeats, seed, &out)?;
            for s in &splits {
                println!("split{}: {} train, {} test", s.repeat, s.train.len(), s.test.len());
            }
        }
        Command::Synth { kind, out, count, noise, seed } => {
            let n = commands::cmd_synth(kind, &out, count, noise, seed)?;
            println!("wrote {n} meshes to {}", out.display());
        }
        Command::Arch { task, classes, tau, blocks, mask } => {
            let base = match task {
                Task::Classification => ModelConfig::classification(classes),
                Task::Segmentation => ModelConfig::segmentation(classes),
            };
            let cfg =
                ModelConfig { tau, blocks: blocks.unwrap_or(base.blocks), mask: mask.unwrap_or(base.mask), ..base };
            print!("{}", commands::cmd_arch(&cfg)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
