use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use finslerkit::experiment::{self, ExperimentConfig};
use finslerkit::Error;

/// Randers/Zermelo geometry experiments.
#[derive(Parser)]
#[command(name = "finslerkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suite named in a config file.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: `out` in the config, else `results/<scene>-<suite>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tolerance override, repeatable: `--tol ode_rel_tol=1e-10`.
        #[arg(long = "tol", value_name = "KEY=VAL")]
        tol: Vec<String>,
    },
    /// Print the builtin scene catalog.
    ListScenes,
}

const THREADS_VAR: &str = "FINSLERKIT_THREADS";

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn parse_tol(item: &str) -> Result<(String, f64), String> {
    let (k, v) = item
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VAL, got `{item}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var(THREADS_VAR) {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => return usage_error(format!("{THREADS_VAR} must be a positive integer, got `{n}`")),
        }
    }
    match cli.command {
        Command::ListScenes => {
            print!("{}", experiment::list_scenes());
            ExitCode::SUCCESS
        }
        Command::Run { config, seed, out, tol } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return usage_error(e),
            };
            if let Err(e) = cfg.suite() {
                eprintln!("valid suites: {}", experiment::SUITES.join(", "));
                return usage_error(e);
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            for item in &tol {
                match parse_tol(item) {
                    Ok((k, v)) => {
                        cfg.tolerances.insert(k, v);
                    }
                    Err(e) => return usage_error(e),
                }
            }
            let outcome = match experiment::run(&cfg) {
                Ok(o) => o,
                Err(e @ (Error::Config(_) | Error::UnknownSuite(_) | Error::Io(_))) => return usage_error(e),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            let dir = out
                .or_else(|| cfg.out.as_ref().map(|o| cfg.base_dir.join(o)))
                .unwrap_or_else(|| {
                    PathBuf::from("results").join(format!("{}-{}", outcome.scene, outcome.suite.name()))
                });
            if let Err(e) = outcome.write(&dir) {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
            print!("{}", outcome.summary());
            println!("artifacts: {}", dir.display());
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
