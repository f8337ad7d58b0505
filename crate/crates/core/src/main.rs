use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use supercon::cli::{self, ExperimentConfig, Overrides, PlotKind, Suite, SEED_ENV};

#[derive(Parser)]
#[command(
    name = "supercon",
    version,
    about = "Superiorization and concentration-of-measure experiments"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and write its results.
    Run {
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        /// JSON config: {"suite", "seed", "output_dir", "params"}.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed; falls back to the config file, then SUPERCON_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Sets every trial count of the suite.
        #[arg(long)]
        trials: Option<usize>,
        /// Sets every dimension of the suite.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses one per core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Turn a results CSV into long-format x,y,series,stderr rows.
    Plotdata {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
        /// Histogram bins for gap-histogram.
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match args.command {
        Command::Run {
            suite,
            config,
            seed,
            trials,
            dim,
            out,
            threads,
        } => {
            let overrides = Overrides {
                suite,
                config,
                seed,
                trials,
                dim,
                out,
                env_seed: std::env::var(SEED_ENV).ok(),
            };
            let cfg = match ExperimentConfig::resolve(&overrides) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match cli::run(&cfg, threads) {
                Ok(output) if output.passed() => {
                    println!(
                        "{}: all {} checks passed ({})",
                        cfg.suite,
                        output.checks.len(),
                        cfg.output_dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Ok(output) => {
                    for c in output.failures() {
                        eprintln!("FAIL {}: value {} against limit {}", c.name, c.value, c.limit);
                    }
                    ExitCode::from(1)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Plotdata { input, kind, out, bins } => match cli::plotdata_file(&input, kind, bins, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
