use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use topoflock::experiments::{emit_report, load_config, run_experiment, Experiment, ExperimentError};

/// Seeded experiments for topological Cucker-Smale flocking.
#[derive(Debug, Parser)]
#[command(name = "topoflock", version)]
struct Cli {
    /// simulate, fournier, chaos, euler-compare or metrics-selftest
    experiment: Experiment,
    /// JSON experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's output_dir, else out/<experiment>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides rng_seed in the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (affects wall time only)
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<Option<String>, ExperimentError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ExperimentError::Validation(vec!["--threads: must be at least 1".into()]));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ExperimentError::Validation(vec![format!("--threads: {e}")]))?;
    }
    let mut config = load_config(&cli.config, Some(cli.experiment), cli.seed)?;
    let out = cli
        .out
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(cli.experiment.name()));
    config.output_dir = Some(out.display().to_string());
    let report = run_experiment(&config)?;
    let manifest = emit_report(&report, &out)?;
    for f in &manifest.files {
        println!("{}  {}  {} bytes", f.sha256, out.join(&f.name).display(), f.bytes);
    }
    Ok(report.halt)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(halt)) => {
            eprintln!("topoflock: {halt}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("topoflock: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
