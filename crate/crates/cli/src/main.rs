//! `tattoo`: generate data, train, enrol, search, evaluate and plot.

mod commands;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tattoo_core::pipeline::FeatureKind;

#[derive(Parser, Debug)]
#[command(
    name = "tattoo",
    version,
    about = "Tattoo retrieval through template reconstruction"
)]
struct Cli {
    /// Worker threads for data-parallel sections (default: all cores).
    #[arg(long, global = true, env = "TATTOO_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a balanced semi-synthetic dataset.
    GenData(GenDataArgs),
    /// Train the network on a dataset manifest.
    Train(TrainArgs),
    /// Build a gallery from a feature file or a manifest and checkpoint.
    Enroll(EnrollArgs),
    /// Query a gallery with a probe image.
    Search(SearchArgs),
    /// Closed- or open-set identification over repeated splits.
    Eval(EvalArgs),
    /// Render CMC/DET CSV files to PNG.
    Plot(PlotArgs),
}

/// Output directory shared by all commands. Without `--out`, a timestamped
/// directory is created under `$TATTOO_OUTPUT_ROOT` (default `runs`).
#[derive(Args, Debug, Clone)]
struct OutArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// Number of procedural glyph templates (ignored with --template-dir).
    #[arg(long, default_value_t = 20)]
    templates: usize,
    /// Samples generated per template.
    #[arg(long)]
    per_template: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory of template PNGs, one category per file.
    #[arg(long)]
    template_dir: Option<PathBuf>,
    /// Directory of skin PNGs; repeat to add pools that split each
    /// template's samples evenly.
    #[arg(long)]
    skin_dir: Vec<PathBuf>,
    /// Side of the square output samples.
    #[arg(long)]
    side: Option<usize>,
    /// TOML file with a `[synth]` section.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// TOML file with a `[model]` section; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    input_side: Option<usize>,
    /// Continue from a checkpoint instead of starting fresh.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FeatureArg {
    Full,
    Raw,
    Template,
}

impl From<FeatureArg> for FeatureKind {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Full => FeatureKind::Full,
            FeatureArg::Raw => FeatureKind::Raw,
            FeatureArg::Template => FeatureKind::Template,
        }
    }
}

#[derive(Args, Debug)]
struct EnrollArgs {
    /// Feature file to enrol as is.
    #[arg(long, conflicts_with_all = ["manifest", "checkpoint"])]
    features: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FeatureArg::Full)]
    feature: FeatureArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SearchArgs {
    /// Gallery file, or a directory containing `gallery.csv`.
    #[arg(long)]
    gallery: PathBuf,
    #[arg(long)]
    probe: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Acceptance threshold; candidates below it are marked rejected.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = FeatureArg::Full)]
    feature: FeatureArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Closed,
    Open,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_enum, default_value_t = EvalMode::Closed)]
    mode: EvalMode,
    /// Precomputed feature file (skips feature extraction).
    #[arg(long, conflicts_with_all = ["manifest", "checkpoint"])]
    features: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FeatureArg::Full)]
    feature: FeatureArg,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Candidate-list rank used for open-set false negatives.
    #[arg(long)]
    rank: Option<usize>,
    /// Highest CMC rank reported (default: number of enrolled categories).
    #[arg(long)]
    max_rank: Option<usize>,
    /// Share of categories left unenrolled in open-set splits.
    #[arg(long)]
    unenrolled_fraction: Option<f64>,
    /// TOML file with an `[eval]` section.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Report directory holding `cmc.csv` and/or `det.csv`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    cmc: Option<PathBuf>,
    #[arg(long)]
    det: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::FAILURE;
        }
        tattoo_core::par::set_worker_count(n);
    }
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Enroll(a) => commands::enroll(a),
        Command::Search(a) => commands::search(a),
        Command::Eval(a) => commands::eval(a),
        Command::Plot(a) => commands::plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
