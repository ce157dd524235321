//! The `nextstep` command line.

mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use nextstep_core::evaluator::RankMode;
use nextstep_core::{ConceptId, Method, ScoreParams, StepKind};

pub use config::ConfigFile;
pub use error::{CliError, EXIT_DATA, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "nextstep", version, about = "Next-step concept prediction and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file of `key = value` defaults for any flag below
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus JSONL file
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Diploma taxonomy CSV (built-in when absent)
    #[arg(long, global = true)]
    pub taxonomy_diploma: Option<PathBuf>,
    /// Job taxonomy CSV (built-in when absent)
    #[arg(long, global = true)]
    pub taxonomy_job: Option<PathBuf>,
    /// Title alias CSV
    #[arg(long, global = true)]
    pub aliases: Option<PathBuf>,
    /// Target kind: diploma or job
    #[arg(long, global = true)]
    pub kind: Option<StepKind>,
    /// baseline | last-diploma | highest-diploma | previous | first-job | next
    #[arg(long, global = true)]
    pub method: Option<Method>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub pack_size: Option<usize>,
    #[arg(long, global = true)]
    pub pack_penalty: Option<f64>,
    /// within_pack or global
    #[arg(long, global = true, value_parser = parse_rank_mode)]
    pub rank_mode: Option<RankMode>,
    /// Reorientation rank threshold
    #[arg(long, global = true)]
    pub threshold: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of users to generate
    #[arg(long, global = true)]
    pub users: Option<usize>,
    /// Machine-readable JSON output
    #[arg(long, global = true)]
    pub json: bool,
    /// Evaluation worker threads
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output file (stdout when absent)
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus as JSONL
    Gen,
    /// Validate and normalize a corpus, printing its statistics
    Ingest,
    /// Train a model and print its dump
    Train,
    /// Rank concepts for one context
    Predict {
        /// Context concepts, e.g. `diploma:1,job:3`
        #[arg(long, value_delimiter = ',')]
        context: Vec<ConceptId>,
        /// Model dump to rank with instead of training on the corpus
        #[arg(long)]
        model: Option<PathBuf>,
        /// Show only the first N concepts
        #[arg(long)]
        top: Option<usize>,
    },
    /// Leave-one-out evaluation report
    Evaluate {
        /// Directory for per-method rank histogram CSVs
        #[arg(long)]
        histogram_dir: Option<PathBuf>,
    },
    /// List held-out steps whose truth ranks beyond the threshold
    Reorient,
    /// Start the HTTP service
    Serve {
        /// Address to listen on
        #[arg(long)]
        bind: Option<String>,
    },
}

fn parse_rank_mode(s: &str) -> Result<RankMode, String> {
    match s {
        "within_pack" | "within-pack" => Ok(RankMode::WithinPack),
        "global" => Ok(RankMode::Global),
        _ => Err(format!("unknown rank mode {s:?} (within_pack or global)")),
    }
}

/// Flags merged over the config file.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub corpus: Option<PathBuf>,
    pub taxonomy_diploma: Option<PathBuf>,
    pub taxonomy_job: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub kind: Option<StepKind>,
    pub method: Option<Method>,
    pub score: ScoreParams,
    pub threshold: Option<usize>,
    pub seed: Option<u64>,
    pub users: Option<usize>,
    pub json: bool,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub bind: Option<String>,
}

impl Settings {
    pub fn resolve(flags: &Flags, file: ConfigFile) -> Result<Self, CliError> {
        let usage = |e: String| CliError::Usage(format!("config: {e}"));
        let kind = match file.kind {
            Some(k) => Some(k.parse::<StepKind>().map_err(|e| usage(e.to_string()))?),
            None => None,
        };
        let method = match file.method {
            Some(m) => Some(m.parse::<Method>().map_err(|e| usage(e.to_string()))?),
            None => None,
        };
        let rank_mode = match file.rank_mode {
            Some(r) => Some(parse_rank_mode(&r).map_err(usage)?),
            None => None,
        };
        let defaults = ScoreParams::default();
        let score = ScoreParams {
            alpha: flags.alpha.or(file.alpha).unwrap_or(defaults.alpha),
            pack_size: flags.pack_size.or(file.pack_size).unwrap_or(defaults.pack_size),
            pack_penalty: flags.pack_penalty.or(file.pack_penalty).unwrap_or(defaults.pack_penalty),
            rank_mode: flags.rank_mode.or(rank_mode).unwrap_or(defaults.rank_mode),
        };
        score.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Settings {
            corpus: flags.corpus.clone().or(file.corpus),
            taxonomy_diploma: flags.taxonomy_diploma.clone().or(file.taxonomy_diploma),
            taxonomy_job: flags.taxonomy_job.clone().or(file.taxonomy_job),
            aliases: flags.aliases.clone().or(file.aliases),
            kind: flags.kind.or(kind),
            method: flags.method.or(method),
            score,
            threshold: flags.threshold.or(file.threshold),
            seed: flags.seed.or(file.seed),
            users: flags.users.or(file.users),
            json: flags.json || file.json.unwrap_or(false),
            jobs: flags.jobs.or(file.jobs),
            out: flags.out.clone(),
            bind: file.bind,
        })
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match &cli.flags.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let settings = Settings::resolve(&cli.flags, file)?;
    commands::dispatch(&cli.command, &settings, out)
}
