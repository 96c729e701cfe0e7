use std::process::ExitCode;

use clap::Parser;

mod config;
mod run;

/// Batch front end: simulate, estimate, replicate, and compare
/// locally stationary VAR(1) models from a JSON config.
#[derive(Debug, Parser)]
#[command(name = "lsvar", version, about)]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: std::path::PathBuf,

    /// Cap on parallel worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,

    /// Output directory, overriding the config.
    #[arg(long)]
    output: Option<std::path::PathBuf>,

    /// Random seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: failed to configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run::run_from_path(&cli.config, cli.output.as_deref(), cli.seed) {
        Ok(artifacts) => {
            for path in artifacts {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
