use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Weight-space interpolation between fine-tuned checkpoints.
#[derive(Debug, Parser)]
#[command(name = "xfer-surface", version)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate checkpoints along the line from --a to --b.
    Interp1d(Interp1dArgs),
    /// Evaluate the plane through --bi spanned by --src and --tgt.
    Interp2d(Interp2dArgs),
    /// Print delta norms and the angle between the two deltas as JSON.
    Diag(DiagArgs),
    /// Write C + B - A on encoder tensors, keeping C's head.
    Analogy(AnalogyArgs),
    /// Train the toy lab for several seeds and write every artifact.
    ToyRun(ToyRunArgs),
    /// Normalize and aggregate a records CSV into JSON.
    Aggregate(AggregateArgs),
    /// Render aggregates as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Toy config JSON providing the dev sets, or `default`.
    #[arg(long, value_name = "default|FILE")]
    eval: String,

    /// Seed of the dev sets; defaults to the seed stored in the checkpoint.
    #[arg(long)]
    seed: Option<u64>,

    /// Which toy domain plays the source language.
    #[arg(long, value_enum, default_value_t = DomainArg::Src)]
    source_domain: DomainArg,

    /// Task tag written to the records.
    #[arg(long, default_value = "toy")]
    task: String,

    /// Coefficient grid: `default` or a JSON grid file.
    #[arg(long, value_name = "default|FILE", default_value = "default")]
    grid: String,

    /// Which tensors are interpolated.
    #[arg(long, value_enum, default_value_t = SubsetArg::All)]
    subset: SubsetArg,

    /// Directory for memoized evaluations.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Interp1dArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[command(flatten)]
    eval: EvalArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Interp2dArgs {
    #[arg(long)]
    bi: PathBuf,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Rescale each filter of both directions to the bilingual filter norm.
    #[arg(long)]
    normalize_directions: bool,
    #[command(flatten)]
    eval: EvalArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DiagArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long)]
    bi: PathBuf,
    /// Report a single filter instead of both `all` and `encoder`.
    #[arg(long, value_enum)]
    subset: Option<SubsetArg>,
}

#[derive(Debug, Args)]
struct AnalogyArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    c: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ToyRunArgs {
    /// Toy config JSON; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[arg(long)]
    out: PathBuf,
    /// Coefficient grid: `default` or a JSON grid file.
    #[arg(long, value_name = "default|FILE", default_value = "default")]
    grid: String,
    #[arg(long, value_enum, default_value_t = SubsetArg::All)]
    subset: SubsetArg,
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ScopeArg::PerPair)]
    scope: ScopeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(value_enum)]
    kind: PlotKind,
    /// Aggregates JSON written by `aggregate` or `toy-run`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Heatmap side.
    #[arg(long, value_enum, default_value_t = SideArg::Target)]
    side: SideArg,
    /// Heatmap group, e.g. `src-tgt/toy`; the first group when omitted.
    #[arg(long)]
    group: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SubsetArg {
    All,
    Encoder,
    Head,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DomainArg {
    Src,
    Tgt,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    PerPair,
    PerTask,
    Pooled,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    Source,
    Target,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlotKind {
    Line,
    Heatmap,
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
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
