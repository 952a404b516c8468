use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use riccati::benchmarks::BENCHMARK_NAMES;
use riccati::experiment::{compare_solvers, dump_benchmark, run_experiment, ExperimentError, RunConfig};

#[derive(Parser)]
#[command(name = "riccati", version, about = "Differential Riccati equation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write CSV tables into <out>/<name>.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. --set h=2^-6.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several configurations on one benchmark and write compare.csv.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the matrices of a benchmark instance.
    Gen {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(BENCHMARK_NAMES))]
        benchmark: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        size: usize,
    },
}

fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, ExperimentError> {
    let mut cfg = RunConfig::from_file(path)?;
    for kv in overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ExperimentError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run { config, overrides, out } => {
            let cfg = load(&config, &overrides)?;
            let dir = run_experiment(&cfg, out.as_deref())?;
            println!("{}", dir.display());
        }
        Command::Compare { configs, out } => {
            let cfgs = configs
                .iter()
                .map(|p| load(p, &[]))
                .collect::<Result<Vec<_>, _>>()?;
            let dir = compare_solvers(&cfgs, out.as_deref())?;
            println!("{}", dir.join("compare.csv").display());
        }
        Command::Gen { benchmark, out, size } => {
            dump_benchmark(&benchmark, size, &out)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[code={} kind={}]: {e}", e.code(), e.kind());
            ExitCode::from(e.code() as u8)
        }
    }
}
