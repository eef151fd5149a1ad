use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nnwfn_cli::commands::{self, BenchArgs, BuildArgs, QuerySource, VerifyArgs};
use nnwfn_cli::dataset::Format;
use nnwfn_cli::CliError;
use nnwfn_core::lsh::DEFAULT_EXPANSION_BUDGET;
use nnwfn_core::reduction::{BuildOptions, PlanOverrides};
use serde::Serialize;

/// c-approximate near-neighbor search without false negatives.
#[derive(Debug, Parser)]
#[command(name = "nnwfn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan parameters, build the index and write a snapshot.
    Build(BuildCmd),
    /// Answer queries against a snapshot.
    Query(QueryCmd),
    /// Check planted queries against exact search.
    Verify(VerifyCmd),
    /// Per-query work and false-positive statistics.
    Bench(BenchCmd),
}

#[derive(Debug, Args)]
struct BuildCmd {
    /// Dataset file, one point per row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Approximation factor.
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Growth function value f(n); defaults to max(√ln n, 2).
    #[arg(long = "f-n")]
    f_n: Option<f64>,
    /// First-stage dimension.
    #[arg(long)]
    k1: Option<usize>,
    /// Leaf block dimension.
    #[arg(long)]
    k2: Option<usize>,
    /// Number of mapping families.
    #[arg(long = "L")]
    families: Option<usize>,
    /// Hash repetitions per part.
    #[arg(long)]
    w: Option<usize>,
    /// Largest accepted 3^(wL) per point.
    #[arg(long, default_value_t = DEFAULT_EXPANSION_BUDGET)]
    budget: u64,
    /// Largest accepted number of block combinations.
    #[arg(long, default_value_t = BuildOptions::default().combo_budget)]
    combo_budget: u64,
    /// Snapshot to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct QueryCmd {
    #[arg(long)]
    snapshot: PathBuf,
    /// A single comma-separated query vector.
    #[arg(long, conflicts_with = "queries", allow_hyphen_values = true)]
    vector: Option<String>,
    /// A dataset file of queries.
    #[arg(long, required_unless_present = "vector")]
    queries: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Use this dataset instead of the path recorded in the snapshot.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyCmd {
    #[arg(long)]
    snapshot: PathBuf,
    /// Number of planted queries.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, hide = true)]
    drop_id: Option<u32>,
}

#[derive(Debug, Args)]
struct BenchCmd {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
}

fn print<T: Serialize>(report: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Build(b) => {
            let args = BuildArgs {
                data: b.data,
                format: b.format,
                c: b.c,
                radius: b.radius,
                seed: b.seed,
                f_n: b.f_n,
                overrides: PlanOverrides { k1: b.k1, k2: b.k2, families: b.families, w: b.w },
                options: BuildOptions { expansion_budget: b.budget, combo_budget: b.combo_budget },
                out: b.out,
            };
            let report = commands::cmd_build(&args)?;
            if report.plan.forced && !report.plan.leaf_feasible() {
                eprintln!(
                    "warning: forced plan with k2 = {} needs c > {:.3} for the leaf guarantee; false positives are only filtered, not bounded",
                    report.plan.k2,
                    report.plan.min_viable_c()
                );
            }
            print(&report)?;
        }
        Command::Query(q) => {
            let source = match (q.vector, q.queries) {
                (Some(v), _) => QuerySource::Inline(commands::parse_inline_vector(&v)?),
                (None, Some(path)) => QuerySource::File { path, format: q.format },
                (None, None) => return Err(CliError::Usage("pass --vector or --queries".into())),
            };
            print(&commands::cmd_query(&q.snapshot, &source, q.data.as_deref())?)?;
        }
        Command::Verify(v) => {
            let report = commands::cmd_verify(&VerifyArgs {
                snapshot: v.snapshot,
                trials: v.trials,
                seed: v.seed,
                dataset_override: v.data,
                drop_id: v.drop_id,
            })?;
            if let Some(w) = &report.warning {
                eprintln!("warning: {w}");
            }
            print(&report)?;
            if !report.passed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Bench(b) => {
            let report = commands::cmd_bench(&BenchArgs {
                snapshot: b.snapshot,
                queries: b.queries,
                format: b.format,
                out: b.out,
                dataset_override: b.data,
            })?;
            print(&report)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
