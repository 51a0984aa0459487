use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use otess_cli::{load_scenario, run, ExitStatus, Mode, RunOptions};

/// Semi-discrete optimal transport tessellations from JSON scenarios.
#[derive(Parser, Debug)]
#[command(name = "otess", version)]
struct Cli {
    /// Pipeline to run.
    #[arg(value_enum)]
    mode: Mode,
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for report.json, figure.svg and CSV exports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Planar lattice resolution, or latitude rows on the sphere.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also dump every grid node with its owner to nodes.csv.
    #[arg(long)]
    nodes_csv: bool,
}

fn exit(status: ExitStatus) -> ExitCode {
    ExitCode::from(status.code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let scenario = match load_scenario(&cli.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit(ExitStatus::InputError);
        }
    };
    let opts = RunOptions {
        out_dir: Some(cli.out.clone()),
        resolution: cli.resolution,
        seed: cli.seed,
        nodes_csv: cli.nodes_csv,
        ..RunOptions::default()
    };
    let outcome = match run(&scenario, Some(cli.mode), &opts) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit(e.status());
        }
    };
    for path in &outcome.written {
        println!("wrote {}", path.display());
    }
    if let Some(s) = &outcome.report.solver {
        if !s.converged {
            eprintln!("solver did not converge: residual {:.3e} after {} iterations", s.residual, s.iterations);
        }
    }
    let failed = outcome.report.failed_checks();
    if !failed.is_empty() {
        eprintln!("failed checks: {}", failed.join(", "));
    }
    exit(outcome.status)
}
