mod config;
mod runs;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::Config;
use runs::dispatch;

/// Entanglement-rate experiments: CSV sweeps and JSON invariant reports.
#[derive(Parser)]
#[command(name = "entaep", version)]
struct Cli {
    /// JSON config file selecting the command and its parameters.
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to the config's `out` field, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the sweep seed of report commands.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (0 or omitted: one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(message) => {
            eprintln!("config error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool, String> {
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| format!("reading {}: {e}", cli.config.display()))?;
    // serde_json's Display carries the line and column of the defect.
    let mut cfg: Config = serde_json::from_str(&text)
        .map_err(|e| format!("parsing {}: {e}", cli.config.display()))?;
    cfg.validate()?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| format!("thread pool: {e}"))?;
    let output = pool.install(|| dispatch(&cfg))?;

    let target = cli.out.clone().or_else(|| cfg.out().cloned());
    match target {
        Some(path) => fs::write(&path, &output.text)
            .map_err(|e| format!("writing {}: {e}", path.display()))?,
        None => print!("{}", output.text),
    }
    Ok(output.pass)
}
