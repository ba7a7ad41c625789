use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use expstrat::config::{resolve, ConfigFile, Overrides};
use expstrat::pipeline;
use expstrat::report::emit;
use expstrat::Error;

/// Bias and MSE of exponential ratio/product-type estimators under
/// stratified random sampling.
#[derive(Debug, Parser)]
#[command(name = "expstrat", version)]
struct Cli {
    /// TOML run configuration; every field can be overridden below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Population CSV with header `stratum,x,y`.
    #[arg(long)]
    population: Option<PathBuf>,
    /// Sample size for one stratum, as STRATUM=SIZE (repeatable).
    #[arg(long = "n", value_name = "STRATUM=SIZE")]
    sample_sizes: Vec<String>,
    /// t1s, t2s, t3s:<alpha|optimize>, t4s:<theta|optimize> (repeatable).
    #[arg(long = "estimator", value_name = "SPEC")]
    estimators: Vec<String>,
    /// 1, 2 or both.
    #[arg(long)]
    order: Option<String>,
    /// Optimize t3s/t4s parameters that are not given explicitly.
    #[arg(long)]
    optimize: bool,
    /// none, exact or mc.
    #[arg(long)]
    verify: Option<String>,
    /// Monte Carlo replicates (required with --verify mc).
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// table, csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Add the printed second-order formulas for t1s/t2s and their deltas.
    #[arg(long)]
    printed_mode: bool,
    /// Largest joint sample space enumerated by --verify exact.
    #[arg(long)]
    max_enum: Option<u64>,
}

fn run(cli: Cli) -> Result<String, Error> {
    let file = match &cli.config {
        Some(path) => ConfigFile::read(path)?,
        None => ConfigFile::default(),
    };
    let overrides = Overrides {
        population: cli.population,
        sample_sizes: cli.sample_sizes,
        estimators: cli.estimators,
        order: cli.order,
        optimize: cli.optimize,
        verify: cli.verify,
        replicates: cli.replicates,
        seed: cli.seed,
        format: cli.format,
        printed_mode: cli.printed_mode,
        max_enum: cli.max_enum,
    };
    let config = resolve(file, overrides)?;
    let report = pipeline::run(&config)?;
    Ok(emit(&report, config.output_format))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
