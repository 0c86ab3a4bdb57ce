//! Command-line front end: surrogate generation, exhaustive optima,
//! campaign execution and report regeneration.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use llmo_core::benchmark::{all_instances, BenchmarkTable};
use llmo_core::experiments::{
    export_convergence_svg, export_records_csv, export_summary_csv, export_traces_csv,
    import_records, run_campaign, summarize,
};

#[derive(Parser)]
#[command(name = "llmo", version, about = "Architecture-search harness over tabular robustness benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for trial execution; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Seed override: surrogate seed for `surrogate`, master seed for `run`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path: the CSV file for `surrogate`, the directory for
    /// `run`/`report`.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic benchmark table in the benchmark CSV format.
    Surrogate {
        /// Pairwise-interaction noise weight in [0, 1].
        #[arg(long, default_value_t = 0.0)]
        ruggedness: f64,
    },
    /// Print the exhaustive optimum of every instance of a table:
    /// `dataset,attack,accuracy,genotype` per line.
    Optimum {
        /// Benchmark CSV path.
        table: PathBuf,
    },
    /// Execute the campaign described by a config file and export
    /// summary.csv, traces.csv, records.csv and convergence.svg.
    Run {
        /// Campaign config (TOML).
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Regenerate summary.csv and convergence.svg from a directory holding
    /// records.csv and traces.csv.
    Report {
        /// Directory with previously exported records.csv and traces.csv.
        records_dir: PathBuf,
    },
}

/// Error classified by exit code.
enum AppError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl AppError {
    fn report(self) -> ExitCode {
        match self {
            AppError::Usage(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
            AppError::Runtime(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> AppError {
    AppError::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> AppError {
    AppError::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Surrogate { ruggedness } => cmd_surrogate(
            cli.seed.unwrap_or(0),
            ruggedness,
            cli.out
                .ok_or_else(|| usage(anyhow!("surrogate needs --out FILE")))?,
        ),
        Command::Optimum { table } => cmd_optimum(&table),
        Command::Run { config } => cmd_run(&config, cli.jobs, cli.seed, cli.out),
        Command::Report { records_dir } => cmd_report(&records_dir, cli.out),
    }
}

fn cmd_surrogate(seed: u64, ruggedness: f64, out: PathBuf) -> Result<(), AppError> {
    config::validate_ruggedness(ruggedness).map_err(usage)?;
    let table = llmo_core::benchmark::generate_surrogate(seed, ruggedness);
    table
        .save(&out)
        .with_context(|| format!("writing '{}'", out.display()))
        .map_err(runtime)?;
    println!("wrote surrogate table (seed {seed}, ruggedness {ruggedness}) to {}", out.display());
    Ok(())
}

fn cmd_optimum(path: &Path) -> Result<(), AppError> {
    let table = BenchmarkTable::load(path)
        .map_err(|e| usage(anyhow!("loading '{}': {e}", path.display())))?;
    for (dataset, attack) in all_instances() {
        let (genotype, accuracy) = table.optimum(dataset, attack);
        println!("{dataset},{attack},{accuracy:.1},{genotype}");
    }
    Ok(())
}

fn cmd_run(
    config_path: &Path,
    jobs: usize,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), AppError> {
    let file_config = config::load_config(config_path).map_err(usage)?;
    let campaign = config::build_campaign(&file_config, jobs, seed).map_err(usage)?;
    let table = config::build_table(&file_config.table).map_err(usage)?;

    let out_dir = out
        .or_else(|| file_config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating '{}'", out_dir.display()))
        .map_err(runtime)?;

    let records = run_campaign(&campaign, &table).map_err(|e| {
        use llmo_core::experiments::CampaignError;
        match e {
            CampaignError::Pool(_) => runtime(e),
            other => usage(other),
        }
    })?;
    let summaries = summarize(&records).map_err(|e| runtime(anyhow!(e)))?;

    export_records_csv(&records, out_dir.join("records.csv")).map_err(|e| runtime(anyhow!(e)))?;
    export_traces_csv(&records, out_dir.join("traces.csv")).map_err(|e| runtime(anyhow!(e)))?;
    export_summary_csv(&summaries, out_dir.join("summary.csv")).map_err(|e| runtime(anyhow!(e)))?;
    export_convergence_svg(&summaries, out_dir.join("convergence.svg"))
        .map_err(|e| runtime(anyhow!(e)))?;

    let incomplete = records.iter().filter(|r| !r.complete).count();
    println!(
        "campaign done: {} records ({} incomplete), reports in {}",
        records.len(),
        incomplete,
        out_dir.display()
    );
    Ok(())
}

fn cmd_report(records_dir: &Path, out: Option<PathBuf>) -> Result<(), AppError> {
    let records_path = records_dir.join("records.csv");
    let traces_path = records_dir.join("traces.csv");
    let records = import_records(&records_path, &traces_path).map_err(|e| usage(anyhow!(e)))?;
    let summaries = summarize(&records).map_err(|e| usage(anyhow!(e)))?;

    let out_dir = out.unwrap_or_else(|| records_dir.to_path_buf());
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating '{}'", out_dir.display()))
        .map_err(runtime)?;
    export_summary_csv(&summaries, out_dir.join("summary.csv")).map_err(|e| runtime(anyhow!(e)))?;
    export_convergence_svg(&summaries, out_dir.join("convergence.svg"))
        .map_err(|e| runtime(anyhow!(e)))?;
    println!(
        "report regenerated from {} records into {}",
        records.len(),
        out_dir.display()
    );
    Ok(())
}
