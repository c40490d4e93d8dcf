mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cogpath_core::classifier::ClassifyError;
use cogpath_core::llm::LlmError;
use cogpath_core::pathway::PipelineError;
use cogpath_core::BackendError;

#[derive(Debug, Parser)]
#[command(name = "cogpath", version, about = "Extract and evaluate ABCD cognitive pathways from social-media posts")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Classifier and summarizer backend; overrides the config file.
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    /// TOML config holding endpoints, token variable names and templates.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// File receiving the machine-readable output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Annotation file the mock backend echoes; defaults to the input's own annotations.
    #[arg(long, global = true)]
    pub fixture: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Mock,
    Remote,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TokenizerArg {
    Auto,
    Chars,
    Words,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split posts into indexed sentences.
    Segment { input: PathBuf },
    /// Assign posts to train/val/test (6:2:2).
    Split {
        input: PathBuf,
        /// Drop posts with fewer words first.
        #[arg(long)]
        min_words: Option<usize>,
        /// Also drop posts containing non-ASCII text.
        #[arg(long)]
        ascii_filter: bool,
    },
    /// Label every sentence of every post.
    Classify { input: PathBuf },
    /// Run the full pipeline and write one pathway per post.
    Extract { input: PathBuf },
    /// Micro P/R/F1 of predicted sentence labels against gold.
    EvalCls {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Rouge-1/2/L and BLEU-4 of summaries against references.
    EvalSum {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        tokenizer: TokenizerArg,
    },
    /// Check a dataset manifest's arithmetic; defaults to the bundled dataset table.
    ValidateManifest {
        manifest: Option<PathBuf>,
        /// Build the manifest from an annotated corpus split with --seed instead.
        #[arg(long, conflicts_with = "manifest")]
        corpus: Option<PathBuf>,
    },
    /// Print dataset, classification and summarization tables.
    Report {
        /// Dataset manifest to print instead of the bundled one.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "cls_gold")]
        cls_pred: Option<PathBuf>,
        #[arg(long, requires = "cls_pred")]
        cls_gold: Option<PathBuf>,
        #[arg(long, requires = "sum_gold")]
        sum_pred: Option<PathBuf>,
        #[arg(long, requires = "sum_pred")]
        sum_gold: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        tokenizer: TokenizerArg,
        /// Model name shown in the summarization table.
        #[arg(long, default_value = "model")]
        model: String,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        addr: Option<String>,
        /// Record log file; overrides the config file.
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

/// Bad flags or configuration detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn is_unavailable(cause: &(dyn std::error::Error + 'static)) -> bool {
    if let Some(e) = cause.downcast_ref::<PipelineError>() {
        return e.is_backend_unavailable();
    }
    matches!(cause.downcast_ref::<ClassifyError>(), Some(ClassifyError::BackendUnavailable(_)))
        || matches!(cause.downcast_ref::<LlmError>(), Some(LlmError::BackendUnavailable(_)))
        || matches!(cause.downcast_ref::<BackendError>(), Some(BackendError::Unavailable(_)))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|c| c.downcast_ref::<UsageError>().is_some()) {
        2
    } else if err.chain().any(is_unavailable) {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .init();
    let cli = Cli::parse();
    match commands::run(cli.command, &cli.global) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
