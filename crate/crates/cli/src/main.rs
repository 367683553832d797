//! `scaffgen` command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use scaffgen::decoder::Policy;

use scaffgen_cli::commands::{self, EvaluateArgs, GenerateArgs, TrainArgs};
use scaffgen_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "scaffgen",
    version,
    about = "Scaffold-constrained molecule generation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Sample,
    Greedy,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the scaffold of every molecule in a SMILES file.
    Scaffold {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes checkpoints, manifests and metrics.csv to --out.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Generate molecules that contain a scaffold.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scaffold: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Property target, e.g. `mw=320`; repeatable.
        #[arg(long = "target", value_parser = parse_target)]
        targets: Vec<(String, f64)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "sample")]
        policy: PolicyArg,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a generation file against a training set.
    Evaluate {
        /// File written by `generate`.
        #[arg(long)]
        generated: PathBuf,
        /// Training molecules, for novelty.
        #[arg(long)]
        dataset: PathBuf,
        /// Text report; a CSV version goes next to it.
        #[arg(long)]
        out: PathBuf,
        /// Checkpoint whose property names label the target columns.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn parse_target(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or("expected name=value")?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("`{value}` is not a number"))?;
    if !value.is_finite() {
        return Err("target must be finite".into());
    }
    Ok((name.trim().to_string(), value))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Command::Scaffold { dataset, out } => commands::cmd_scaffold(&dataset, &out),
        Command::Train {
            config,
            dataset,
            out,
            seed,
            workers,
        } => commands::cmd_train(TrainArgs {
            config: &config,
            dataset: &dataset,
            out: &out,
            seed,
            workers,
            command_line: std::env::args().collect(),
        })
        .map(drop),
        Command::Generate {
            checkpoint,
            scaffold,
            n,
            targets,
            seed,
            policy,
            workers,
            out,
        } => commands::cmd_generate(GenerateArgs {
            checkpoint: &checkpoint,
            scaffold: &scaffold,
            n,
            targets: &targets,
            seed,
            policy: match policy {
                PolicyArg::Sample => Policy::Sample,
                PolicyArg::Greedy => Policy::Greedy,
            },
            workers,
            out: out.as_deref(),
        })
        .map(drop),
        Command::Evaluate {
            generated,
            dataset,
            out,
            checkpoint,
        } => commands::cmd_evaluate(EvaluateArgs {
            generated: &generated,
            dataset: &dataset,
            out: &out,
            checkpoint: checkpoint.as_deref(),
        })
        .map(|report| print!("{}", report.to_text())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
