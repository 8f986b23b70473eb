//! Command-line front end: forward and inverse solves, round-trip and
//! convergence experiments, stability reports, and the star-graph
//! variants. All artifacts are JSON (CSV for sweeps) and embed the
//! config hash; a manifest with versions, seed and timings is written
//! next to each artifact.

mod ops;

use clap::{Args, Parser, Subcommand};
use matspec_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "matspec", version, about = "Matrix Sturm-Liouville spectral toolbox")]
struct Cli {
    /// Seed recorded in artifacts and manifests; generated problems use it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (overrides MATSPEC_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Args)]
struct ForwardArgs {
    /// Interval problem JSON.
    #[arg(long)]
    problem: std::path::PathBuf,
    /// Number of eigenvalue bands to compute.
    #[arg(long, default_value_t = ops::DEFAULT_BANDS)]
    bands: usize,
    /// Also emit the weight matrices.
    #[arg(long)]
    weights: bool,
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Clone, Args)]
struct InverseArgs {
    /// Spectral data JSON.
    #[arg(long)]
    spectra: std::path::PathBuf,
    #[arg(long, default_value_t = ops::DEFAULT_BANDS)]
    bands: usize,
    /// Reconstruction grid segments.
    #[arg(long, default_value_t = ops::DEFAULT_GRID)]
    grid: usize,
    #[arg(long)]
    out: std::path::PathBuf,
    /// Keep the raw (non-Hermitian-projected) output.
    #[arg(long)]
    no_symmetrize: bool,
    /// Debug: dump the assembled system at this point to `<out>.system.json`.
    #[arg(long)]
    dump_system: Option<f64>,
}

#[derive(Clone, Args)]
struct RoundtripArgs {
    #[arg(long)]
    problem: std::path::PathBuf,
    #[arg(long, default_value_t = ops::DEFAULT_BANDS)]
    bands: usize,
    #[arg(long, default_value_t = ops::DEFAULT_GRID)]
    grid: usize,
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Clone, Args)]
struct StabilityArgs {
    #[arg(long)]
    spectra_a: std::path::PathBuf,
    #[arg(long)]
    spectra_b: std::path::PathBuf,
    /// `auto` or a partition JSON file (list of lists of [n, k]).
    #[arg(long, default_value = "auto")]
    partition: String,
    /// Gap parameter of the greedy auto partition.
    #[arg(long, default_value_t = 0.5)]
    gap: f64,
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Clone, Args)]
struct PartitionArgs {
    #[arg(long)]
    spectra_a: std::path::PathBuf,
    #[arg(long)]
    spectra_b: std::path::PathBuf,
    #[arg(long, default_value_t = 0.5)]
    gap: f64,
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Clone, Args)]
struct SweepArgs {
    #[arg(long)]
    problem: std::path::PathBuf,
    /// Prefix band counts, e.g. `5,10,20`.
    #[arg(long, default_value = "5,10,20")]
    prefixes: String,
    #[arg(long, default_value_t = ops::DEFAULT_BANDS)]
    bands: usize,
    #[arg(long, default_value_t = ops::DEFAULT_GRID)]
    grid: usize,
    /// Output CSV path.
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Clone, Subcommand)]
enum GraphCommand {
    /// Eigenvalue bands and norming vectors of a star-graph problem.
    Forward {
        #[arg(long)]
        problem: std::path::PathBuf,
        /// Expected edge count; checked against the problem file.
        #[arg(long)]
        edges: Option<usize>,
        #[arg(long, default_value_t = ops::DEFAULT_BANDS)]
        bands: usize,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Recover per-edge potentials from graph spectral data.
    Inverse {
        #[arg(long)]
        spectra: std::path::PathBuf,
        #[arg(long, default_value_t = ops::DEFAULT_BANDS)]
        bands: usize,
        #[arg(long, default_value_t = ops::DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long)]
        no_symmetrize: bool,
    },
    /// Forward solve followed by reconstruction, with error norms.
    Roundtrip {
        #[arg(long)]
        problem: std::path::PathBuf,
        /// Expected edge count; checked against the problem file.
        #[arg(long)]
        edges: Option<usize>,
        #[arg(long, default_value_t = ops::DEFAULT_BANDS)]
        bands: usize,
        #[arg(long, default_value_t = ops::DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        out: std::path::PathBuf,
    },
}

#[derive(Clone, Subcommand)]
enum Command {
    /// Compute eigenvalue bands and norming vectors of an interval problem.
    Forward(ForwardArgs),
    /// Reconstruct `(Q, h, H)` from spectral data.
    Inverse(InverseArgs),
    /// Forward solve, reconstruct, and report error norms.
    Roundtrip(RoundtripArgs),
    /// Stability diagnostics for two spectral data sets.
    Stability(StabilityArgs),
    /// Emit the greedy partition for two spectral data sets.
    Partition(PartitionArgs),
    /// Finite-data convergence experiment: reconstruction error vs prefix size.
    Sweep(SweepArgs),
    /// Star-graph problems.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
}

fn exit_code(err: &CoreError) -> i32 {
    match err {
        CoreError::Parse(_) => 1,
        CoreError::Invalid(_) => 2,
        CoreError::BandIncomplete { .. }
        | CoreError::RankMismatch { .. }
        | CoreError::NearEigenvalue { .. }
        | CoreError::IllConditioned { .. }
        | CoreError::DegenerateZ { .. } => 3,
    }
}

fn error_kind(err: &CoreError) -> &'static str {
    match err {
        CoreError::Parse(_) => "parse",
        CoreError::Invalid(_) => "validation",
        _ => "numerical",
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        std::env::set_var("MATSPEC_THREADS", t.to_string());
    }
    let ctx = ops::RunContext::new(cli.seed);
    let result = match cli.command {
        Command::Forward(a) => ops::forward(&ctx, &a.problem, a.bands, a.weights, &a.out),
        Command::Inverse(a) => ops::inverse(
            &ctx,
            &a.spectra,
            a.bands,
            a.grid,
            !a.no_symmetrize,
            a.dump_system,
            &a.out,
        ),
        Command::Roundtrip(a) => ops::roundtrip(&ctx, &a.problem, a.bands, a.grid, &a.out),
        Command::Stability(a) => {
            ops::stability(&ctx, &a.spectra_a, &a.spectra_b, &a.partition, a.gap, &a.out)
        }
        Command::Partition(a) => ops::partition(&ctx, &a.spectra_a, &a.spectra_b, a.gap, &a.out),
        Command::Sweep(a) => ops::sweep(&ctx, &a.problem, &a.prefixes, a.bands, a.grid, &a.out),
        Command::Graph { command } => match command {
            GraphCommand::Forward {
                problem,
                edges,
                bands,
                out,
            } => ops::graph_forward(&ctx, &problem, edges, bands, &out),
            GraphCommand::Inverse {
                spectra,
                bands,
                grid,
                out,
                no_symmetrize,
            } => ops::graph_inverse(&ctx, &spectra, bands, grid, !no_symmetrize, &out),
            GraphCommand::Roundtrip {
                problem,
                edges,
                bands,
                grid,
                out,
            } => ops::graph_roundtrip(&ctx, &problem, edges, bands, grid, &out),
        },
    };
    if let Err(err) = result {
        let payload = serde_json::json!({
            "kind": error_kind(&err),
            "message": err.to_string(),
        });
        eprintln!("{payload}");
        std::process::exit(exit_code(&err));
    }
}
