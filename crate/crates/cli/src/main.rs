use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use carryscan::commands;
use carryscan::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "carryscan", version, about = "Carried-object detection experiments on simulated 77 GHz MIMO radar")]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print resolution and ambiguity limits of the configured radar.
    Capabilities,
    /// Print the effective configuration as TOML.
    Config,
    /// Simulate walking subjects and write raw frames plus a manifest.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        subjects: usize,
        #[arg(long, default_value_t = 300)]
        frames: usize,
    },
    /// Detect, cluster and crop cubes from simulated frames.
    Preprocess {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Image one random chirp per frame instead of averaging all.
        #[arg(long)]
        random_chirp: bool,
    },
    /// Train the classifier on a cube directory.
    Train {
        #[arg(long)]
        cubes: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Score held-out tracked subjects and write COD-single / COD-multi rows.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track one walking subject and log per-frame decisions.
    Track {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        subject: usize,
    },
    /// Time simulation, preprocessing and prediction of one frame.
    Bench {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Capabilities => println!("{}", commands::capabilities(&cfg)?),
        Command::Config => print!("{}", cfg.to_toml_string()),
        Command::Simulate { out, subjects, frames } => {
            let m = commands::simulate(&cfg, &out, subjects, frames)?;
            println!("{} frames written to {}", m.rows.len(), out.display());
        }
        Command::Preprocess { frames, out, random_chirp } => {
            let m = commands::preprocess(&cfg, &frames, &out, random_chirp)?;
            println!("{} cubes written to {}", m.rows.len(), out.display());
        }
        Command::Train { cubes, model } => println!("{}", commands::train(&cfg, &cubes, &model)?),
        Command::Eval { model, out } => print!("{}", commands::eval(&cfg, &model, &out)?),
        Command::Track { model, out, frames, subject } => {
            let log = commands::track(&cfg, model.as_deref(), &out, frames, subject)?;
            println!("{} track records written to {}", log.rows.len(), out.join("tracks.tsv").display());
        }
        Command::Bench { model, runs } => print!("{}", commands::bench(&cfg, model.as_deref(), runs)?),
    }
    Ok(())
}

fn execute<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(execute(std::env::args_os()))
}
