//! `prefsim`: seeded contest simulation, downstream decision experiments,
//! and the built-in guarantee checks, all driven by a JSON scenario config.
//!
//! Exit codes: 0 on success, 1 when a verify check fails, 2 on usage or
//! config errors.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use commands::{CommonArgs, OutputFormat};

#[derive(Parser)]
#[command(
    name = "prefsim",
    version,
    about = "Simulate preference contests between generative policies and check the selection guarantees"
)]
struct Cli {
    #[command(flatten)]
    common: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Scenario config file (JSON)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config's seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Repetition count for estimates and experiments; overrides the config's reps
    #[arg(long, global = true)]
    reps: Option<u64>,

    /// Directory that receives trials.csv and report.json
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Which output files to write
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Both)]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded head-to-head contest and score both objectives
    Contest {
        /// Two policy names from the config, comma separated
        #[arg(long, value_delimiter = ',', value_name = "A,B")]
        pair: Option<Vec<String>>,
    },
    /// Run the downstream decision experiment for every configured policy
    Decide,
    /// Run the guarantee checks and report pass/fail per scenario
    Verify {
        /// Which checks to run: T1,T2,T3,T4 or all
        #[arg(long, value_delimiter = ',', default_value = "all")]
        theorems: Vec<String>,
    },
    /// Replay the built-in two-response example with its fixed record
    ExampleFig1,
}

fn main() {
    // Die quietly on a closed pipe (e.g. piping into `head`) instead of
    // panicking; Rust ignores SIGPIPE by default.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();
    let args = CommonArgs {
        config: cli.common.config,
        seed: cli.common.seed,
        reps: cli.common.reps,
        out: cli.common.out,
        format: cli.common.format,
    };
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Contest { pair } => commands::run_contest_command(&args, pair.as_deref()),
        Command::Decide => commands::run_decide_command(&args),
        Command::Verify { theorems } => commands::run_verify_command(&args, theorems),
        Command::ExampleFig1 => commands::run_example_fig1(&args),
    };
    let code = match outcome {
        Ok(code) => {
            // Timing goes to stdout only; the output files must stay
            // byte-identical across machines and thread counts.
            println!("completed in {:.3} s", start.elapsed().as_secs_f64());
            code
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    };
    std::process::exit(code);
}
