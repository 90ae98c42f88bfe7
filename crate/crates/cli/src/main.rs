use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod artifacts;
mod commands;
mod config;

use config::PipelineConfig;

/// Generate synthetic extractive QA pairs from an explained document
/// classifier, and evaluate QA predictions.
#[derive(Debug, Parser)]
#[command(name = "xaiqa", version)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed applied to every randomized stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Directory for outputs without an explicit path.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus JSON-lines file (defaults to paths.corpus).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Label vocabulary JSON-lines file (defaults to paths.vocab).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the builtin TF-IDF logistic-regression classifier.
    TrainClassifier {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute sentence importance matrices with masked sampling.
    Explain {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Trained model (builtin backend).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        mask_probability: Option<f64>,
        /// Keep matrices already in the output file and explain only the rest.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate one QA pair per (document, positive label).
    Generate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        method: Option<xaiqa::generator::Method>,
        /// Importance matrices (xaiqa method).
        #[arg(long)]
        importance: Option<PathBuf>,
        #[arg(long)]
        template: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Narrow answers to the list item or clause closest to the question.
    Postprocess {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Keep the r highest-scored pairs.
    Select {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mix base and synthetic pairs at a base:synthetic ratio.
    Mix {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        /// Ratio such as 2:1.
        #[arg(long)]
        ratio: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Query-context lexical overlap of evaluation items.
    Qclo {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hardest fraction of items by QCLO.
    Subset {
        #[arg(long)]
        hardness: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against gold answers.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// QCLO records; adds hardest-subset strata.
        #[arg(long)]
        hardness: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Significance tests and annotation summaries.
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
    /// Write zero- or few-shot prompts for evaluation items.
    PromptBuild {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        gold: PathBuf,
        /// Ranked synthetic pairs to draw in-context examples from.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        max_units: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn raw model responses into predictions.
    ParseResponses {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Welch's t-test between two samples.
    Welch {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Combine two annotators' judgements and measure agreement.
    Annotations {
        #[arg(long)]
        records: PathBuf,
        /// JSON-lines {"pair_id", "method"} for per-method counts.
        #[arg(long)]
        methods: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn error_class(err: &anyhow::Error) -> &'static str {
    err.chain().find_map(|e| e.downcast_ref::<xaiqa::Error>()).map_or("internal", xaiqa::Error::class)
}

fn one_line(err: &anyhow::Error) -> String {
    format!("{err:#}").replace('\n', " | ")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), std::env::vars())?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(dir) = cli.output_dir {
        cfg.paths.output_dir = Some(dir);
    }
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(xaiqa::Error::InvalidConfig("--workers must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    commands::dispatch(cli.command, cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("XAIQA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {}", error_class(&err), one_line(&err));
            ExitCode::FAILURE
        }
    }
}
