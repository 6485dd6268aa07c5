//! `fabseg`: remesh, segment, classify, link, stylize, sweep, corpus
//! management and the review service from the command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data, 3 internal.

mod commands;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fabseg_core::classify::LinkageMode;

use crate::error::{CliError, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "fabseg", version, about = "Functionality-aware mesh segmentation, classification and styling")]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Errors as one JSON object on stderr.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remesh to a uniform face count.
    Remesh(RemeshArgs),
    /// Spectral segmentation; writes a segmentation JSON.
    Segment(SegmentArgs),
    /// Label segments against a corpus index; writes a report JSON.
    Classify(ClassifyArgs),
    /// Detect linkages between the components in a directory.
    Link(LinkArgs),
    /// Displace and color the aesthetic segments of a mesh.
    Stylize(StylizeArgs),
    /// Predicted k across a list of remesh resolutions.
    Sweep(SweepArgs),
    /// Corpus ingest, index and evaluation.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Run the HTTP review service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RemeshArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = fabseg_core::mesh::DEFAULT_TARGET_FACES)]
    pub target: usize,
    #[arg(long, default_value_t = 0.02)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Segment count; predicted from the spectrum when omitted.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k_min: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k_max: Option<u64>,
    /// Eigenvalues in the prediction window.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Component mesh; repeat together with --seg for a multi-part thing.
    #[arg(long = "in", required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, required = true)]
    pub seg: Vec<PathBuf>,
    /// Corpus index directory.
    #[arg(long, env = "FABSEG_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = fabseg_core::classify::DEFAULT_ALPHA, value_parser = unit_interval)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_meshes: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_segments: u64,
    #[arg(long, value_enum, default_value_t = Mode::Contextual)]
    pub linkage: Mode,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Mode {
    Contextual,
    Raw,
}

impl From<Mode> for LinkageMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Contextual => LinkageMode::Contextual,
            Mode::Raw => LinkageMode::Raw,
        }
    }
}

#[derive(Debug, Args)]
pub struct LinkArgs {
    /// Directory of `<name>.obj|stl` + `<name>.seg.json`, optionally
    /// `<name>.labels.json` with external labels.
    #[arg(long)]
    pub thing: PathBuf,
    #[arg(long, default_value_t = fabseg_core::classify::DEFAULT_ALPHA, value_parser = unit_interval)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Mode::Contextual)]
    pub linkage: Mode,
    /// Classify externally against this index first (full thing report).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StylizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub seg: PathBuf,
    /// A JSON label array, or a classify report.
    #[arg(long)]
    pub labels: PathBuf,
    /// Component to take from a classify report (default: file stem of --in).
    #[arg(long)]
    pub mesh_id: Option<String>,
    /// Peak displacement in mm.
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub amplitude: f64,
    /// Noise cycles per bounding-box diagonal.
    #[arg(long = "freq", default_value_t = 4.0, value_parser = positive)]
    pub frequency: f64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..=16))]
    pub octaves: u32,
    /// Comma-separated hex colors, low to high.
    #[arg(long, value_parser = palette)]
    pub palette: Option<Palette>,
    #[arg(long)]
    pub out: PathBuf,
    /// Provenance sidecar (default: `<out>.style.json`).
    #[arg(long)]
    pub provenance: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Palette(pub Vec<[f64; 3]>);

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = fabseg_core::spectral::SWEEP_RESOLUTIONS)]
    pub resolutions: Vec<usize>,
    #[arg(long, default_value_t = 0.02)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Validate a manifest and report accepted and rejected entries.
    Ingest(IngestArgs),
    /// Ingest a manifest and write the index directory.
    Index(IndexArgs),
    /// Grouped k-fold evaluation of an index.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Remesh target for entries without face labels.
    #[arg(long, default_value_t = fabseg_core::mesh::DEFAULT_TARGET_FACES)]
    pub target: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    /// Index directory to write.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value_t = fabseg_core::shape::DEFAULT_BASE_POINTS)]
    pub base_points: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    pub folds: u64,
    #[arg(long, default_value_t = fabseg_core::classify::DEFAULT_ALPHA, value_parser = unit_interval)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = fabseg_service::DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Corpus index directory; classification is unavailable without one.
    #[arg(long, env = "FABSEG_CORPUS")]
    pub corpus: Option<PathBuf>,
    /// Persist the session here (write-through).
    #[arg(long)]
    pub persist: Option<PathBuf>,
    #[arg(long, default_value_t = 24.0, value_parser = positive)]
    pub idle_hours: f64,
    /// Allowed browser origin (default: any).
    #[arg(long)]
    pub cors_origin: Option<String>,
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be a finite number >= 0"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be a finite number > 0"))
    }
}

fn palette(s: &str) -> Result<Palette, String> {
    let colors = s
        .split(',')
        .map(|c| {
            let hex = c.trim().trim_start_matches('#');
            if hex.len() != 6 {
                return Err(format!("{c:?} is not a #rrggbb color"));
            }
            let channel = |i: usize| {
                u8::from_str_radix(&hex[i..i + 2], 16)
                    .map(|v| f64::from(v) / 255.0)
                    .map_err(|_| format!("{c:?} is not a #rrggbb color"))
            };
            Ok([channel(0)?, channel(2)?, channel(4)?])
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Palette(colors))
}

fn init_logging(quiet: bool) {
    let default = if quiet { "error" } else { "warn" };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| default.into());
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn run(args: Vec<OsString>) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return Ok(());
            }
            return Err(CliError::new(ErrorKind::Usage, e.render().to_string()));
        }
    };
    init_logging(cli.quiet);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.into())
            .build_global()
            .map_err(|e| CliError::new(ErrorKind::Internal, e.to_string()))?;
    }
    commands::dispatch(&cli)
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let json = args.iter().any(|a| a == "--json");
    let outcome = std::panic::catch_unwind(|| run(args))
        .unwrap_or_else(|_| Err(CliError::new(ErrorKind::Internal, "internal error (panic)")));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.report(json);
            ExitCode::from(e.kind.code())
        }
    }
}
