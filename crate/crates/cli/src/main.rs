use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use socialgaze::report::{self, Command, RunOptions, TestChoice};
use socialgaze::MeasureConfig;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Per-observation gaze measures (measures.csv)
    Measures,
    /// Framework ratio vs human-coded ratio (evaluation.json, scatter.csv, kde.csv)
    Evaluate,
    /// Group, activity and session comparisons (tests.json, table2/3.csv, ...)
    Analyze,
    /// Score prediction ablation (table4.csv, predict.json)
    Predict,
    /// Write a synthetic cohort with a manifest
    Synth,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Test {
    Student,
    Welch,
    Auto,
}

/// Mutual-gaze measures, statistics and social visual behavior prediction.
#[derive(Debug, Parser)]
#[command(name = "gm", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,

    /// Cohort manifest (JSON); required by every command except synth
    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,

    #[arg(long)]
    seed: Option<u64>,

    /// Score cutoff; frames count as gaze only strictly above it
    #[arg(long, default_value_t = 0.6)]
    threshold: f64,

    /// Runs must be longer than this many seconds to count for duration
    #[arg(long, default_value_t = 1.0)]
    min_run_seconds: f64,

    /// Bootstrap replicates for predict
    #[arg(long = "B", default_value_t = 1000)]
    bootstrap: usize,

    /// JSON config: analysis plan (analyze), model hyperparameters
    /// (predict) or cohort settings (synth)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the t-test of every comparison (analyze)
    #[arg(long, value_enum)]
    test: Option<Test>,

    /// Print the main artifact on stdout instead of writing it
    #[arg(long)]
    stdout: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();

    let cmd = match args.command {
        Cmd::Measures => Command::Measures,
        Cmd::Evaluate => Command::Evaluate,
        Cmd::Analyze => Command::Analyze,
        Cmd::Predict => Command::Predict,
        Cmd::Synth => Command::Synth,
    };
    let opts = RunOptions {
        manifest: args.manifest,
        out: args.out,
        seed: args.seed,
        measure: MeasureConfig {
            score_threshold: args.threshold,
            min_run_seconds: args.min_run_seconds,
        },
        bootstrap: args.bootstrap,
        config: args.config,
        test: args.test.map(|t| match t {
            Test::Student => TestChoice::Student,
            Test::Welch => TestChoice::Welch,
            Test::Auto => TestChoice::Auto,
        }),
        stdout: args.stdout,
    };

    match report::run(cmd, &opts) {
        Ok(outcome) => {
            if let Some(text) = outcome.stdout {
                let mut out = std::io::stdout().lock();
                if out
                    .write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .is_err()
                {
                    return ExitCode::from(2);
                }
            }
            for p in &outcome.written {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gm: {e}");
            ExitCode::from(report::exit_code(&e) as u8)
        }
    }
}
