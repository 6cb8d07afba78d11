use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "mpm-hybrid", version, about = "Hybrid MPM fluid-solid simulation with a learned pressure warm start")]
struct Cli {
    /// Seed for scene randomization, weight init and batch order.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 keeps every run reproducible bit for bit.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// JSON config for the subcommand; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset of normalized pressure tensors.
    GenData(GenData),
    /// Train the surrogate on a generated dataset.
    Train(Train),
    /// Run a physical or hybrid simulation.
    Simulate(Simulate),
    /// Compare two trajectory or scene directories frame by frame.
    Evaluate(Evaluate),
    /// Describe a .pgt tensor, a .mpmw checkpoint or a dataset directory.
    Inspect(Inspect),
}

#[derive(Args, Debug)]
pub struct GenData {
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated templates: dam_break, solids_drop, water_drop.
    #[arg(long, value_delimiter = ',')]
    pub templates: Option<Vec<String>>,
    #[arg(long)]
    pub scenes_per_template: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub solids: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    /// Start from the full-size plan (15 scenes, 585 frames, 32 cells).
    #[arg(long)]
    pub paper: bool,
}

#[derive(Args, Debug)]
pub struct Train {
    /// Dataset directory holding manifest.json.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "train-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// huber, mse or mae.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
}

#[derive(Args, Debug)]
pub struct Simulate {
    #[arg(long)]
    pub out: PathBuf,
    /// Total frames, physical and predicted.
    #[arg(long, default_value_t = 60)]
    pub frames: usize,
    /// Scene template used when no config is given.
    #[arg(long, default_value = "dam_break")]
    pub template: String,
    #[arg(long, default_value_t = 16)]
    pub resolution: usize,
    #[arg(long, default_value_t = 2)]
    pub solids: usize,
    #[arg(long, default_value_t = 500.0)]
    pub density: f64,
    /// Solver for physical frames: gs or mgpcg.
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Physical frames before prediction starts; omit for a physical run.
    #[arg(long)]
    pub physical: Option<usize>,
    /// Surrogate checkpoint (.mpmw).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// surrogate, previous, zero or exact.
    #[arg(long)]
    pub predictor: Option<String>,
    #[arg(long)]
    pub refine_tol: Option<f64>,
    #[arg(long)]
    pub refine_solver: Option<String>,
}

#[derive(Args, Debug)]
pub struct Evaluate {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Frames excluded from the summary means.
    #[arg(long, default_value_t = 50)]
    pub skip: usize,
    /// Write the summary as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Inspect {
    pub path: PathBuf,
    /// Re-hash every file listed in a dataset manifest.
    #[arg(long)]
    pub verify: bool,
}

pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<mpm_hybrid::Error> for Failure {
    fn from(e: mpm_hybrid::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

/// Reads a JSON config; unreadable or malformed files are usage errors.
pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))
}

pub fn parse<T: std::str::FromStr<Err = mpm_hybrid::Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(|e: mpm_hybrid::Error| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // prints help and version on stdout with exit 0, usage errors with exit 2
            e.exit();
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    let config = cli.config.as_deref();
    let result = match &cli.command {
        Command::GenData(a) => commands::gen_data(a, cli.seed, config),
        Command::Train(a) => commands::train(a, cli.seed, config),
        Command::Simulate(a) => commands::simulate(a, cli.seed, config),
        Command::Evaluate(a) => no_config(config, "evaluate").and_then(|_| commands::evaluate(a)),
        Command::Inspect(a) => no_config(config, "inspect").and_then(|_| commands::inspect(a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn no_config(config: Option<&Path>, command: &str) -> CliResult {
    match config {
        Some(_) => Err(Failure::Usage(format!("{command} takes no --config"))),
        None => Ok(()),
    }
}
