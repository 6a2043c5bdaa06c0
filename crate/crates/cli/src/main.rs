use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "opportune", version, about = "Discover and adopt goal opportunities while a temporal plan runs")]
struct Cli {
    /// TOML configuration; defaults to $OPPORTUNE_CONFIG.
    #[arg(long, global = true, env = "OPPORTUNE_CONFIG")]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set match.class_threshold=0.8`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Build, enrich, measure and compare ontologies.
    #[command(subcommand)]
    Ontology(OntologyCmd),
    /// Position a concept of one ontology inside another.
    Align {
        /// Ontology to extend (usually the task ontology).
        target: PathBuf,
        /// Ontology holding the concept.
        source: PathBuf,
        concept: String,
        #[arg(long)]
        edges: Option<PathBuf>,
    },
    /// Solve a planning task.
    Plan {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// Write the plan here as text.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Execute a plan against scripted observations.
    Simulate {
        #[command(flatten)]
        task: TaskArgs,
        /// Plan to execute; solved when omitted.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        scenario: PathBuf,
        /// Write the execution log here, one JSON record per line.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        sources: Sources,
    },
    /// Run the integration pipeline on one observation.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Subcommand, Debug)]
enum OntologyCmd {
    /// Ontology of a task's types and objects.
    Build {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Annotate every concept from a knowledge edge table.
    Enrich {
        ontology: PathBuf,
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Semantic variance.
    Sv { ontology: PathBuf },
    /// Rank a repository by similarity to an ontology.
    Similar {
        ontology: PathBuf,
        repo: PathBuf,
        /// Enrich both sides first.
        #[arg(long)]
        edges: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum PipelineCmd {
    /// Integrate the objects of the observed atoms at time `--at`.
    Run {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Minutes; the plan is executed up to here first. Defaults to the
        /// horizon start.
        #[arg(long)]
        at: Option<i64>,
        /// Observed atom, e.g. `(open Virgen_plaza)`; repeatable.
        #[arg(long = "observe", required = true)]
        observe: Vec<String>,
        #[command(flatten)]
        sources: Sources,
    },
}

#[derive(Args, Debug)]
struct TaskArgs {
    domain: PathBuf,
    problem: PathBuf,
}

/// Paths that take precedence over the configuration.
#[derive(Args, Debug, Default)]
struct Sources {
    #[arg(long)]
    repo: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    provider: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StrategyArg {
    Optimal,
    Greedy,
}

/// An error with a specific exit status.
#[derive(Debug)]
struct Exit {
    code: u8,
    msg: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for Exit {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.downcast_ref::<Exit>().map_or(1, |x| x.code))
        }
    }
}
