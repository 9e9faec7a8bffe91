//! `lfsc`: train dictionaries, encode, decode, evaluate and synthesize light
//! fields.
//!
//! Exit codes: 0 success, 1 other failure, 2 bad arguments, 3 I/O,
//! 4 malformed or corrupt input, 5 dictionary hash mismatch.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;

#[derive(Parser, Debug)]
#[command(name = "lfsc", version, about = "Sparse-coding light field codec")]
struct Cli {
    /// Worker threads (outputs are identical for any count)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    /// TOML file with default options
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a dictionary with K-SVD, or write the cosine fallback
    TrainDict(TrainArgs),
    /// Encode a light field into a stream
    Encode(EncodeArgs),
    /// Decode a stream into a light field
    Decode(DecodeArgs),
    /// Render a synthetic layered-plane light field
    Synth(SynthArgs),
    /// Measure quality, sweep rates or compare RD curves
    Eval(EvalArgs),
    /// Estimate and dump the patch disparity map
    Disparity(DisparityArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory of images, light field directories or .lfraw files
    #[arg(long, required_unless_present = "dct_fallback")]
    pub corpus: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Skip training and emit the deterministic cosine dictionary
    #[arg(long)]
    pub dct_fallback: bool,
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Atoms per training patch during pursuit
    #[arg(long)]
    pub sparsity: Option<usize>,
    /// Number of training canvases drawn from the corpus
    #[arg(long)]
    pub patches: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct CoderArgs {
    /// Dictionary file (falls back to the config, then $LFSC_DICT)
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long)]
    pub q_skv: Option<u8>,
    #[arg(long)]
    pub q_res: Option<u8>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_coeffs: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Cost aggregation radius for disparity estimation
    #[arg(long)]
    pub radius: Option<usize>,
    /// Code every view with the residual codec, no sparse approximation
    #[arg(long)]
    pub baseline: bool,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub coder: CoderArgs,
    /// Also write the encoder-side reconstruction here
    #[arg(long)]
    pub recon: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dict: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory (with --suite, one subdirectory per scene)
    #[arg(short, long)]
    pub out: PathBuf,
    /// Scene description as JSON; overrides the shape flags below
    #[arg(long, conflicts_with = "suite")]
    pub spec: Option<PathBuf>,
    /// Write the standard three-scene suite
    #[arg(long)]
    pub suite: bool,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Angular grid side
    #[arg(long, default_value_t = 15)]
    pub views: usize,
    /// Background plane disparity
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub disparity: f64,
    /// Add an occluding foreground rectangle at this disparity
    #[arg(long, allow_negative_numbers = true)]
    pub front: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Original light field
    #[arg(long, required_unless_present = "bd")]
    pub orig: Option<PathBuf>,
    /// Reconstruction to compare against the original
    #[arg(long, conflicts_with_all = ["stream", "sweep", "bd"])]
    pub recon: Option<PathBuf>,
    /// Stream to decode and compare against the original
    #[arg(long, conflicts_with_all = ["sweep", "bd"])]
    pub stream: Option<PathBuf>,
    /// Comma-separated q values to encode at
    #[arg(long, value_delimiter = ',', conflicts_with = "bd")]
    pub sweep: Option<Vec<u8>>,
    /// Compare two RD CSVs: ANCHOR TEST
    #[arg(long, num_args = 2, value_names = ["ANCHOR", "TEST"])]
    pub bd: Option<Vec<PathBuf>>,
    /// Write rows to this CSV instead of stdout
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also write a gnuplot-style table
    #[arg(long)]
    pub dat: Option<PathBuf>,
    #[command(flatten)]
    pub coder: CoderArgs,
}

#[derive(Args, Debug)]
pub struct DisparityArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Directory for the level and confidence PGMs
    #[arg(short, long)]
    pub out: PathBuf,
    /// Dictionary whose disparity grid to use (default grid otherwise)
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
}

/// A usage problem detected after parsing.
#[derive(Debug)]
pub struct ArgError(pub String);

impl std::fmt::Display for ArgError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ArgError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use lfsc_core::error::Error as E;
    for cause in err.chain() {
        if cause.is::<ArgError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io(_) => 3,
                E::Image(_)
                | E::Format(_)
                | E::Corrupt(_)
                | E::DimensionMismatch(_)
                | E::MissingView(..)
                | E::UnsupportedBitDepth(_) => 4,
                E::HashMismatch { .. } => 5,
                E::InvalidArgument(_) => 2,
            };
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(n) = cli.threads.or(config.threads) {
        if n == 0 {
            return Err(ArgError("--threads must be positive".into()).into());
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let ctx = commands::Ctx { config, json: cli.json };
    match cli.command {
        Command::TrainDict(a) => commands::train_dict(&ctx, a),
        Command::Encode(a) => commands::encode(&ctx, a),
        Command::Decode(a) => commands::decode(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Disparity(a) => commands::disparity(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lfsc: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
