//! Command-line entry points for dataset generation, relation-model
//! training, embedding, precondition training, evaluation and baselines.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use relpre::pipeline::{PipelineError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "relpre", version, about = "Relational object embeddings and skill precondition models")]
struct Cli {
    /// Run configuration file with key=value lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Named preset (desk or full) used when no config file is given.
    #[arg(long, global = true, conflicts_with = "config")]
    preset: Option<String>,
    /// Extra key=value override applied after the config file. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Sweep,
    Unstack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Learned,
    Discrete26,
    Meanpos,
    Bbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKind {
    Discrete,
    Meanpos,
    Bbox,
    Real2sim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Geometry {
    /// Ground-truth object boxes.
    Exact,
    /// Boxes fitted to the voxelised scene.
    Voxel,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate pairwise interaction scenes.
    GenInteractions {
        /// Scene count; defaults to interactions.count from the config.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Generate labelled task scenes.
    GenTask {
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Object counts, e.g. "3..5", "3,4,5" or "7".
        #[arg(long, value_name = "RANGE")]
        blocks: String,
        /// Scenes per object count.
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Share of marginal scenes; defaults to the task's configured value.
        #[arg(long)]
        marginal_fraction: Option<f64>,
        /// Scene id of the first generated scene.
        #[arg(long, default_value_t = 0)]
        first_id: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Train the relation model on an interaction dataset.
    TrainRelnet {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// JSON-lines report path; stdout if omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Embed every object pair of a task dataset with a trained relation model.
    Embed {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Train a precondition classifier on a task dataset.
    TrainPrecond {
        #[arg(long)]
        train: PathBuf,
        #[arg(long, value_enum, default_value = "learned")]
        source: SourceArg,
        /// Embedding table covering the training scenes (learned source only).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Evaluate a precondition checkpoint on a task dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a baseline: a classifier on hand-made features, or Real2Sim.
    Baseline {
        #[arg(long, value_enum)]
        kind: BaselineKind,
        /// Training scenes (not used by real2sim).
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        /// Scene geometry handed to real2sim.
        #[arg(long, value_enum, default_value = "voxel")]
        geometry: Geometry,
        #[arg(long)]
        seed: Option<u64>,
        /// Print the edge features of the test scenes instead of training.
        #[arg(long)]
        dump_edges: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare analytic gradients with finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::desk(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| PipelineError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() -> Result<(), PipelineError> {
    if let Ok(v) = std::env::var("RELPRE_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| PipelineError::Config(format!("RELPRE_THREADS={v:?} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    configure_threads()?;
    let cfg = load_config(&cli)?;
    use commands as c;
    match cli.command {
        Command::GenInteractions { count, seed, out, force } => c::gen_interactions(&cfg, count, seed, &out, force),
        Command::GenTask { task, blocks, count, seed, marginal_fraction, first_id, out, force } => {
            c::gen_task(&cfg, task, &blocks, count, seed, marginal_fraction, first_id, &out, force)
        }
        Command::TrainRelnet { data, seed, out, report, force } => c::train_relnet(&cfg, &data, seed, &out, report.as_deref(), force),
        Command::Embed { model, scenes, out, force } => c::embed(&cfg, &model, &scenes, &out, force),
        Command::TrainPrecond { train, source, embeddings, seed, out, report, force } => {
            c::train_precond(&cfg, &train, source, embeddings.as_deref(), seed, &out, report.as_deref(), force)
        }
        Command::Eval { model, test, embeddings, report } => c::eval(&cfg, &model, &test, embeddings.as_deref(), report.as_deref()),
        Command::Baseline { kind, train, test, geometry, seed, dump_edges, report } => {
            c::baseline(&cfg, kind, train.as_deref(), &test, geometry, seed, dump_edges, report.as_deref())
        }
        Command::Gradcheck { seed, report } => c::gradcheck(seed, report.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
