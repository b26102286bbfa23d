use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

use noisekey_cli::report::{emit_report, Provenance};
use noisekey_cli::runner::run_experiment;
use noisekey_cli::spec::{parse_spec, ReportFormat};
use noisekey_cli::CliError;

#[derive(Parser)]
#[command(
    name = "noisekey",
    version,
    about = "Seeded experiment runner for noise-driven key exchange simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec and emit its report.
    Run {
        /// Path to the experiment spec (JSON).
        spec: PathBuf,
        /// Report destination (defaults to the spec's output path, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report format (defaults to the spec's, else csv).
        #[arg(long)]
        format: Option<FormatArg>,
        /// Override the spec's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the spec's trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Worker threads (default: NOISEKEY_JOBS, else all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Parse and validate a spec without running it.
    Validate {
        /// Path to the experiment spec (JSON).
        spec: PathBuf,
    },
}

fn load_spec(path: &PathBuf) -> Result<noisekey_cli::spec::ExperimentSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_spec(&text)
}

fn jobs_from_env() -> Option<usize> {
    std::env::var("NOISEKEY_JOBS").ok()?.parse().ok()
}

fn real_main() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Validate { spec } => {
            let parsed = load_spec(&spec)?;
            eprintln!(
                "ok: {} ({:?}, {} trial(s), seed {})",
                spec.display(),
                parsed.kind,
                parsed.trials,
                parsed.master_seed
            );
            Ok(())
        }
        Command::Run {
            spec,
            out,
            format,
            seed,
            trials,
            jobs,
        } => {
            let mut parsed = load_spec(&spec)?;
            if let Some(seed) = seed {
                parsed.master_seed = seed;
            }
            if let Some(trials) = trials {
                if trials == 0 {
                    return Err(CliError::config("trials must be >= 1"));
                }
                parsed.trials = trials;
            }

            let format = match (format, &parsed.output) {
                (Some(FormatArg::Csv), _) => ReportFormat::Csv,
                (Some(FormatArg::Json), _) => ReportFormat::Json,
                (None, Some(output)) => output.format,
                (None, None) => ReportFormat::Csv,
            };
            let out_path = out.or_else(|| parsed.output.as_ref().map(|o| PathBuf::from(&o.path)));

            let jobs = jobs.or_else(jobs_from_env);
            let rows = match jobs {
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n.max(1))
                        .build()
                        .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
                    pool.install(|| run_experiment(&parsed))?
                }
                None => run_experiment(&parsed)?,
            };

            let provenance = Provenance::for_spec(&parsed);
            emit_report(&rows, &provenance, format, out_path.as_deref())?;
            if let Some(p) = out_path {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("noisekey: {e}");
        std::process::exit(e.exit_code());
    }
}
