//! Batch command-line interface: `surface`, `pretrain`, `score`, `eval` and
//! `embed-pack`.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, ErrorClass, Result};
use crate::gvp::Mode;

pub use commands::{run_embed_pack, run_eval, run_pretrain, run_score, run_surface, parse_text_matrix};
pub use config::{config_hash, EvalConfig, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "protfit", version, about = "Protein fitness prediction from sequence, structure and surface")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// TOML file layered over the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub deterministic: Option<bool>,
    /// s2f, s3f or surf_only.
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a surface point cloud with features and write it as TSV.
    Surface(SurfaceArgs),
    /// Masked-residue pre-training on a corpus directory.
    Pretrain(PretrainArgs),
    /// Score the variants of an assay with a checkpoint.
    Score(ScoreArgs),
    /// Metric report of score files against assays.
    Eval(EvalArgs),
    /// Pack a whitespace-separated embedding matrix into the binary format.
    EmbedPack(EmbedPackArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SurfaceArgs {
    pub structure: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Sample 6K to 20K points.
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PretrainArgs {
    pub corpus: PathBuf,
    /// Output directory for checkpoints and the loss log.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Plain gradient descent instead of adaptive moments.
    #[arg(long)]
    pub sgd: bool,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub structure: PathBuf,
    #[arg(long)]
    pub assay: PathBuf,
    /// Surface dump; generated from the structure when absent.
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    /// Directory of `.s3fe` files, one per masking pattern (file embedder).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Baseline scores for low-confidence sites (`mutant,score`).
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// External scores to ensemble by z-score sum (`mutant,score`).
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    #[arg(long)]
    pub plddt_threshold: Option<f64>,
    #[arg(long)]
    pub per_site_gating: bool,
    /// Added to sequence indices to get the assay's residue numbering.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub offset: i64,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Score files, paired with `--assay` by position.
    #[arg(long, num_args = 1.., required = true)]
    pub scores: Vec<PathBuf>,
    #[arg(long, num_args = 1.., required = true)]
    pub assay: Vec<PathBuf>,
    /// Score files of a second model, paired the same way.
    #[arg(long, num_args = 1..)]
    pub reference: Vec<PathBuf>,
    /// Score column to evaluate (`score` or `ensemble`).
    #[arg(long, default_value = "score")]
    pub column: String,
    /// Assay column for breakdown rows; `depth` falls back to the number of
    /// substitutions.
    #[arg(long)]
    pub group_by: Option<String>,
    /// Bootstrap std error of the Spearman difference against `--reference`.
    #[arg(long)]
    pub bootstrap: bool,
    #[arg(long)]
    pub n_boot: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmbedPackArgs {
    pub matrix: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Masked positions (0-based) the embeddings were computed with.
    #[arg(long, value_delimiter = ',')]
    pub mask: Vec<usize>,
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::from_toml_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(t) = global.threads {
        cfg.threads = t;
    }
    if let Some(d) = global.deterministic {
        cfg.deterministic = d;
    }
    if let Some(m) = global.mode {
        cfg.model.mode = m;
    }
    Ok(cfg)
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Usage => EXIT_USAGE,
        ErrorClass::Data => EXIT_DATA,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

/// Run one parsed command; returns a human-readable summary.
pub fn run(cli: Cli) -> Result<String> {
    let cfg = resolve_config(&cli.global)?;
    if cfg.threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    match cli.command {
        Command::Surface(a) => run_surface(&a, cfg),
        Command::Pretrain(a) => run_pretrain(&a, cfg),
        Command::Score(a) => run_score(&a, cfg, cli.global.mode),
        Command::Eval(a) => run_eval(&a, cfg),
        Command::EmbedPack(a) => run_embed_pack(&a, cfg),
    }
}

/// Parse `args`, run, print, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
