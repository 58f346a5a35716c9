mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use medpipe::infer::ExplainMethod;

#[derive(Parser, Debug)]
#[command(name = "medpipe", version, about = "Clinical data pipeline: detect, anonymize, match, preprocess, infer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the full pipeline on one dataset (file or ZIP).
    Run(RunArgs),
    /// Apply edits to a plan and revalidate it.
    PlanReview(PlanReviewArgs),
    /// Check a model database file.
    RegistryValidate(RegistryArgs),
    /// Print the content-detected MIME type of files.
    DetectType(DetectArgs),
}

#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// TOML config file; flags override its values.
    #[arg(long, env = "MEDPIPE_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExplainArg {
    Shapley,
    Permutation,
    Off,
}

impl From<ExplainArg> for ExplainMethod {
    fn from(e: ExplainArg) -> Self {
        match e {
            ExplainArg::Shapley => ExplainMethod::Shapley,
            ExplainArg::Permutation => ExplainMethod::Permutation,
            ExplainArg::Off => ExplainMethod::Off,
        }
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Input files; together they form one dataset.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Model database JSON.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// `fallback` or the base URL of an embedding service.
    #[arg(long)]
    pub embedder: Option<String>,
    /// Minimum header similarity (exclusive).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Seed for splits and sampling; also makes timestamps logical.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Force automatic preprocessing.
    #[arg(long)]
    pub auto: bool,
    #[arg(long, value_enum)]
    pub explain: Option<ExplainArg>,
    /// JSON list of plan edits to merge over the recommendation.
    #[arg(long)]
    pub edits: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlanReviewArgs {
    /// Plan document written by `run` (or a bare plan).
    pub plan: PathBuf,
    /// JSON list of edits.
    #[arg(long)]
    pub edits: PathBuf,
    /// Where to write the revised plan; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Args, Debug)]
pub struct RegistryArgs {
    pub path: PathBuf,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// List the leaves of ZIP archives.
    #[arg(long)]
    pub recursive: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_USAGE } else { commands::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::PlanReview(a) => commands::plan_review(a),
        Command::RegistryValidate(a) => commands::registry_validate(a),
        Command::DetectType(a) => commands::detect_type(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_USAGE)
        }
    }
}
