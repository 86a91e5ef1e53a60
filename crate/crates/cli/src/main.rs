//! Command-line front end: evaluate a run spec, re-render a report, or
//! compare certificates across runs.
//!
//! Exit codes: 0 success, 2 invalid spec or incomparable certificates,
//! 3 evaluation finished with per-run failures (outputs are still written),
//! 4 I/O or data errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use interp_cert::metrics::InterpretabilityCertificate;
use interp_cert::report::{
    compare, execute, render_table, write_report, Report, ReportError, RunSpec,
};

const EXIT_SPEC: u8 = 2;
const EXIT_PARTIAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "interp-cert",
    version,
    about = "Certify how much interpretable procedures teach simple models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a JSON spec and write a report.
    ///
    /// Relative dataset paths resolve against INTERP_CERT_DATA_DIR when it
    /// is set. Image datasets are plain IDX pairs in the layout the MNIST
    /// distribution uses (train-images-idx3-ubyte / train-labels-idx1-ubyte,
    /// from https://yann.lecun.com/exdb/mnist/); nothing is downloaded.
    Evaluate {
        /// Path to the run-spec JSON file.
        #[arg(long)]
        spec: PathBuf,
        /// Directory the report is written into.
        #[arg(long)]
        out: PathBuf,
        /// Replace the spec's seed list (repeatable).
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-render the table from a previously written report.
    Report {
        /// Report directory (or a summary.json path).
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Compare certificates across reports or certificate files.
    Compare {
        /// Report directories, summary.json files or certificate files
        /// (repeatable).
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        /// Delta slack for equivalence grouping.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

type Failure = (u8, String);

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Evaluate { spec, out, seeds, jobs } => evaluate(spec, out, seeds, jobs),
        Command::Report { input } => {
            let report = load_report(&input)?;
            print!("{}", render_table(&report));
            Ok(0)
        }
        Command::Compare { inputs, alpha } => compare_inputs(&inputs, alpha),
    }
}

fn evaluate(
    spec_path: PathBuf,
    out: PathBuf,
    seeds: Vec<u64>,
    jobs: Option<usize>,
) -> Result<u8, Failure> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| (EXIT_IO, format!("cannot size the worker pool: {e}")))?;
    }
    let text = fs::read_to_string(&spec_path)
        .map_err(|e| (EXIT_IO, format!("cannot read {}: {e}", spec_path.display())))?;
    let mut spec: RunSpec = serde_json::from_str(&text)
        .map_err(|e| (EXIT_SPEC, format!("invalid run spec {}: {e}", spec_path.display())))?;
    if !seeds.is_empty() {
        spec.seeds = seeds;
    }
    let data_root = std::env::var_os("INTERP_CERT_DATA_DIR").map(PathBuf::from);

    let report = execute(&spec, data_root.as_deref()).map_err(|e| {
        let code = match e {
            ReportError::SpecValidation(_) => EXIT_SPEC,
            _ => EXIT_IO,
        };
        (code, e.to_string())
    })?;
    write_report(&report, &out)
        .map_err(|e| (EXIT_IO, format!("cannot write report to {}: {e}", out.display())))?;
    print!("{}", render_table(&report));
    eprintln!("report written to {}", out.display());
    if report.failures.is_empty() {
        Ok(0)
    } else {
        for f in &report.failures {
            eprintln!("FAILED {} seed {}: {}", f.procedure_id, f.seed, f.message);
        }
        Ok(EXIT_PARTIAL)
    }
}

fn load_report(input: &Path) -> Result<Report, Failure> {
    let path = if input.is_dir() { input.join("summary.json") } else { input.to_path_buf() };
    let text = fs::read_to_string(&path)
        .map_err(|e| (EXIT_IO, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| (EXIT_IO, format!("{} is not a report: {e}", path.display())))
}

fn load_certificates(input: &Path) -> Result<Vec<InterpretabilityCertificate>, Failure> {
    let path = if input.is_dir() { input.join("summary.json") } else { input.to_path_buf() };
    let text = fs::read_to_string(&path)
        .map_err(|e| (EXIT_IO, format!("cannot read {}: {e}", path.display())))?;
    if let Ok(report) = serde_json::from_str::<Report>(&text) {
        return Ok(if report.aggregated.is_empty() {
            report.certificates
        } else {
            report.aggregated
        });
    }
    serde_json::from_str::<InterpretabilityCertificate>(&text).map(|c| vec![c]).map_err(|_| {
        (EXIT_IO, format!("{} is neither a report nor a certificate", path.display()))
    })
}

fn compare_inputs(inputs: &[PathBuf], alpha: f64) -> Result<u8, Failure> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err((EXIT_SPEC, format!("alpha must be a nonnegative real, got {alpha}")));
    }
    let mut certificates = Vec::new();
    for input in inputs {
        certificates.extend(load_certificates(input)?);
    }
    let (edges, classes) = compare(&certificates, alpha)
        .map_err(|e| (EXIT_SPEC, format!("certificates are not comparable: {e}")))?;
    println!("certificates: {}", certificates.len());
    println!("equivalence classes (alpha = {alpha}):");
    for class in &classes {
        println!("  {{{}}}", class.join(", "));
    }
    println!("dominance:");
    if edges.is_empty() {
        println!("  (none)");
    } else {
        for (a, b) in &edges {
            println!("  {a} > {b}");
        }
    }
    Ok(0)
}
