use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use flexprot_cli::config::SweepSpec;
use flexprot_cli::output::{emit, encode, Format};
use flexprot_cli::sweep::run_sweep;
use flexprot_core::rsa::ProtectionMode;

/// Availability-aware RSA simulator with shared-backup and cycle protection.
///
/// Without --config a single cell is run on NSFNET. Grid flags accept comma
/// separated lists and replace the matching config axis.
#[derive(Debug, Parser)]
#[command(name = "flexprot", version)]
struct Args {
    /// TOML sweep file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Topology file (`node` / `link` lines) instead of NSFNET.
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    mode: Vec<ProtectionMode>,
    /// Offered load in Erlang per node.
    #[arg(long, value_delimiter = ',')]
    load: Vec<f64>,
    /// Availability threshold.
    #[arg(long, value_delimiter = ',')]
    ath: Vec<f64>,
    /// Average link availability.
    #[arg(long, value_delimiter = ',')]
    avg_availability: Vec<f64>,
    /// Requests per run.
    #[arg(long)]
    requests: Option<u64>,
    /// Seed of the first repetition.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<u32>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Fill the runtime_s column (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Worker threads; all cores by default.
    #[arg(long)]
    jobs: Option<usize>,
}

fn build_spec(args: &Args) -> anyhow::Result<SweepSpec> {
    let mut spec = match &args.config {
        Some(path) => SweepSpec::load(path)?,
        None => SweepSpec::default(),
    };
    if let Some(t) = &args.topology {
        spec.topology = Some(t.clone());
    }
    if !args.mode.is_empty() {
        spec.grid.modes = args.mode.clone();
    }
    if !args.load.is_empty() {
        spec.grid.load = args.load.clone();
    }
    if !args.ath.is_empty() {
        spec.grid.a_th = args.ath.clone();
    }
    if !args.avg_availability.is_empty() {
        spec.grid.avg_availability = args.avg_availability.clone();
    }
    if let Some(n) = args.requests {
        spec.scenario.n_requests = n;
    }
    if let Some(s) = args.seed {
        spec.base_seed = s;
    }
    if let Some(r) = args.repetitions {
        spec.repetitions = r;
    }
    Ok(spec)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match real_main(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main(args: &Args) -> anyhow::Result<ExitCode> {
    if let Some(j) = args.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    let spec = build_spec(args)?;
    let result = run_sweep(&spec, args.timing)?;
    match &args.out {
        Some(path) => emit(&result.rows, args.format, path)?,
        None => std::io::stdout()
            .write_all(&encode(&result.rows, args.format)?)
            .context("writing stdout")?,
    }
    for e in &result.errors {
        let c = &e.cell;
        eprintln!(
            "cell failed (mode={} load={} avg_avail={} a_th={} seed={}): {}",
            c.mode, c.load_erlang, c.avg_avail, c.a_th, c.seed, e.message
        );
    }
    Ok(if result.errors.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
