use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coca::estimators::build_coca_problem;
use coca_bench::{
    emit, run_experiment, selftest, to_csv, to_json, trial_samples, BenchError, ExperimentConfig, OutputFormat,
};

#[derive(Parser)]
#[command(name = "coca-bench", version, about = "Monte Carlo benchmarks for structured shape-matrix estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// smoke, toeplitz-desk, banded-desk, toeplitz-paper or banded-paper.
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig, BenchError> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, Some(name)) => ExperimentConfig::preset(name),
            (None, None) => Err(BenchError::Config("pass --config or --preset".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write the result table.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write the COCA conic program of one trial in text form.
    SolveDebug {
        #[command(flatten)]
        source: Source,
        /// Sample size (default: first grid point).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn write_out(text: &str, out: Option<&PathBuf>) -> Result<(), BenchError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| BenchError::Io(path.display().to_string(), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool, BenchError> {
    match cli.command {
        Command::Run { source, out, format, threads } => {
            let config = source.load()?;
            let table = run_experiment(&config, threads)?;
            match &out {
                Some(path) => emit(&table, format, path)?,
                None => match format {
                    OutputFormat::Csv => print!("{}", to_csv(&table)),
                    OutputFormat::Json => print!("{}", to_json(&table)?),
                },
            }
            let failures: usize = table.cells.iter().map(|c| c.failures).sum();
            if failures > 0 {
                eprintln!("{failures} estimator failures recorded");
            }
            Ok(true)
        }
        Command::SolveDebug { source, n, trial, out } => {
            let config = source.load()?;
            let n = n.unwrap_or(config.n_grid[0]);
            let truth = config.target.resolve(config.p)?.matrix;
            let samples = trial_samples(&config, &truth, n, trial)?;
            let built = build_coca_problem(&samples, &config.structure, config.norm)?;
            write_out(&built.problem.to_text(), out.as_ref())?;
            Ok(true)
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
