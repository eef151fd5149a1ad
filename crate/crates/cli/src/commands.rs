//! The `build`, `query`, `verify` and `bench` commands.
//!
//! Each command returns a serializable report; `main` prints it as JSON.
//! Apart from the `*_ms` / `*_us` timing fields, reports depend only on
//! the inputs and seeds.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nnwfn_core::lsh::sample_unit_vector;
use nnwfn_core::oracle::{sandwich_check, OracleResult, Violation};
use nnwfn_core::reduction::{default_f_n, plan_with_overrides, BuildOptions, NnwfnIndex, PlanOverrides, ProblemConfig, ReductionPlan};
use nnwfn_core::rng::{stream_rng, Purpose};
use nnwfn_core::scalar::distance;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, parse_csv, Dataset, Format};
use crate::error::CliError;
use crate::snapshot::{load_index, save_snapshot, DatasetRef, IndexSnapshot, Loaded, FORMAT_VERSION};

pub fn resolve_format(path: &Path, format: Option<Format>) -> Result<Format, CliError> {
    format
        .or_else(|| Format::from_path(path))
        .ok_or_else(|| CliError::Usage(format!("cannot infer the format of {}, pass --format", path.display())))
}

#[derive(Debug, Clone)]
pub struct BuildArgs {
    pub data: PathBuf,
    pub format: Option<Format>,
    pub c: f64,
    pub radius: f64,
    pub seed: u64,
    pub f_n: Option<f64>,
    pub overrides: PlanOverrides,
    pub options: BuildOptions,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub snapshot: PathBuf,
    pub fingerprint: String,
    pub config: ProblemConfig,
    pub plan: ReductionPlan,
    pub overrides: PlanOverrides,
    pub blocks_per_family: usize,
    pub combinations: usize,
    pub expansion_per_point: u64,
    pub expansion_budget: u64,
    pub budget_usage: f64,
    pub total_bucket_entries: usize,
    pub build_ms: f64,
}

pub fn cmd_build(args: &BuildArgs) -> Result<BuildReport, CliError> {
    let format = resolve_format(&args.data, args.format)?;
    let dataset = load_dataset(&args.data, format)?;
    if dataset.is_empty() {
        return Err(CliError::Usage("dataset is empty, nothing to index".into()));
    }
    let config = ProblemConfig::new(dataset.len(), dataset.dim(), args.c, args.radius)?;
    let f_n = args.f_n.unwrap_or_else(|| default_f_n(dataset.len()));
    let plan = plan_with_overrides(&config, f_n, &args.overrides)?;

    let started = Instant::now();
    let index = NnwfnIndex::build(dataset.points(), &config, &plan, args.seed, &args.options)?;
    let build_ms = started.elapsed().as_secs_f64() * 1e3;

    let data_path = std::fs::canonicalize(&args.data).map_err(|e| CliError::io(&args.data, e))?;
    let snapshot = IndexSnapshot {
        format_version: FORMAT_VERSION,
        seed: args.seed,
        config,
        plan: plan.clone(),
        dataset: DatasetRef { path: data_path, format, fingerprint: dataset.fingerprint() },
        expansion_budget: args.options.expansion_budget,
        combo_budget: args.options.combo_budget,
    };
    save_snapshot(&args.out, &snapshot)?;

    let expansion = plan.leaf_params()?.expansion();
    Ok(BuildReport {
        snapshot: args.out.clone(),
        fingerprint: snapshot.dataset.fingerprint,
        config,
        plan: plan.clone(),
        overrides: args.overrides.clone(),
        blocks_per_family: plan.blocks_per_family(config.d),
        combinations: index.combinations().len(),
        expansion_per_point: expansion,
        expansion_budget: args.options.expansion_budget,
        budget_usage: expansion as f64 / args.options.expansion_budget as f64,
        total_bucket_entries: index.total_bucket_entries(),
        build_ms,
    })
}

#[derive(Debug, Clone)]
pub enum QuerySource {
    Inline(Vec<f64>),
    File { path: PathBuf, format: Option<Format> },
}

impl QuerySource {
    pub fn load(&self) -> Result<Dataset, CliError> {
        match self {
            Self::Inline(v) => Ok(Dataset::new(vec![v.clone()])?),
            Self::File { path, format } => Ok(load_dataset(path, resolve_format(path, *format)?)?),
        }
    }
}

/// Parses `"1.0,2.0,3.0"`.
pub fn parse_inline_vector(text: &str) -> Result<Vec<f64>, CliError> {
    let parsed = parse_csv(text)?;
    match parsed.into_points().as_slice() {
        [single] => Ok(single.clone()),
        _ => Err(CliError::Usage("--vector takes exactly one comma-separated vector".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query: usize,
    pub ids: Vec<u32>,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub results: Vec<QueryRecord>,
}

pub fn cmd_query(snapshot: &Path, source: &QuerySource, dataset_override: Option<&Path>) -> Result<QueryReport, CliError> {
    let Loaded { index, .. } = load_index(snapshot, dataset_override)?;
    run_queries(&index, &source.load()?)
}

pub fn run_queries(index: &nnwfn_core::Index, queries: &Dataset) -> Result<QueryReport, CliError> {
    let results = queries
        .points()
        .par_iter()
        .enumerate()
        .map(|(query, q)| {
            let r = index.query(q)?;
            Ok(QueryRecord { query, ids: r.ids, distances: r.distances })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(QueryReport { results })
}

#[derive(Debug, Clone)]
pub struct VerifyArgs {
    pub snapshot: PathBuf,
    pub trials: usize,
    pub seed: u64,
    pub dataset_override: Option<PathBuf>,
    /// Fault injection: remove this point from every bucket and aim trial 0 at it.
    pub drop_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffenderRecord {
    pub trial: usize,
    pub id: u32,
    pub distance: f64,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub passed: bool,
    pub false_negatives: usize,
    pub soundness_violations: usize,
    pub offenders: Vec<OffenderRecord>,
    pub mean_result_size: f64,
    pub warning: Option<String>,
    pub elapsed_ms: f64,
}

/// Query `x_p + r·u` for a random stored point `p`, a uniform direction `u` and `r ~ U[0.1, 1]·R`.
pub fn planted_query(points: &[Vec<f64>], radius: f64, seed: u64, trial: usize, target: Option<usize>) -> Result<(usize, Vec<f64>), CliError> {
    let mut rng = stream_rng(seed, Purpose::Workload, trial as u64);
    let p = rng.random_range(0..points.len());
    let p = target.unwrap_or(p);
    let r = rng.random_range(0.1..=1.0) * radius;
    let u: Vec<f64> = sample_unit_vector(points[p].len(), &mut rng)?;
    Ok((p, points[p].iter().zip(&u).map(|(x, d)| x + r * d).collect()))
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyReport, CliError> {
    let Loaded { mut index, dataset, snapshot } = load_index(&args.snapshot, args.dataset_override.as_deref())?;
    if let Some(id) = args.drop_id {
        if id as usize >= dataset.len() {
            return Err(CliError::Usage(format!("--drop-id {id} is out of range")));
        }
        index.drop_from_buckets(id);
    }
    verify_index(&index, dataset.points(), snapshot.config, args.trials, args.seed, args.drop_id.map(|i| i as usize))
}

pub fn verify_index(
    index: &nnwfn_core::Index,
    points: &[Vec<f64>],
    config: ProblemConfig,
    trials: usize,
    seed: u64,
    first_target: Option<usize>,
) -> Result<VerifyReport, CliError> {
    let started = Instant::now();
    let mut warning = None;
    if trials == 0 {
        warning = Some("trials = 0: nothing was checked".to_string());
    } else if points.is_empty() {
        warning = Some("empty dataset: nothing was checked".to_string());
    }
    let runs = if points.is_empty() { 0 } else { trials };
    let outcomes = (0..runs)
        .into_par_iter()
        .map(|trial| {
            let target = if trial == 0 { first_target } else { None };
            let (_, q) = planted_query(points, config.radius, seed, trial, target)?;
            let result = index.query(&q)?;
            let oracle = OracleResult::compute(points, &q, config.radius, config.c)?;
            let report = sandwich_check(&result, &oracle);
            let offenders: Vec<OffenderRecord> = report
                .offenders
                .into_iter()
                .map(|o| OffenderRecord {
                    trial,
                    id: o.id,
                    distance: o.distance,
                    kind: match o.kind {
                        Violation::FalseNegative => "false_negative".into(),
                        Violation::Soundness => "soundness".into(),
                    },
                })
                .collect();
            Ok((offenders, result.len()))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let offenders: Vec<OffenderRecord> = outcomes.iter().flat_map(|(o, _)| o.iter().cloned()).collect();
    let false_negatives = offenders.iter().filter(|o| o.kind == "false_negative").count();
    let soundness_violations = offenders.len() - false_negatives;
    let mean_result_size = if runs == 0 { 0.0 } else { outcomes.iter().map(|(_, n)| *n as f64).sum::<f64>() / runs as f64 };
    Ok(VerifyReport {
        trials,
        passed: offenders.is_empty(),
        false_negatives,
        soundness_violations,
        offenders,
        mean_result_size,
        warning,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchQuery {
    pub query: usize,
    /// Bucket entries read over all combinations.
    pub raw_candidates: usize,
    pub leaf_hits: usize,
    pub unique_candidates: usize,
    /// Unique candidates removed by the final distance filter.
    pub filtered_out: usize,
    pub result_size: usize,
    /// Unique candidates farther than `cR`.
    pub false_positive_candidates: usize,
    pub false_negatives: usize,
    pub wall_time_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchAggregate {
    pub queries: usize,
    pub combinations: usize,
    pub total_bucket_entries: usize,
    pub false_negatives: usize,
    pub mean_raw_candidates: f64,
    pub mean_unique_candidates: f64,
    pub mean_result_size: f64,
    /// Share of (query, combination, far point) triples where the far point passed the leaf filter.
    pub empirical_fp_rate: f64,
    /// Share of (query, far point) pairs where the far point became a candidate at all.
    pub empirical_candidate_fp_rate: f64,
    /// `exp(−k₂((c−α)/(2c))²)`, one block mapping a far point within the leaf cap.
    pub analytic_single_mapping_bound: f64,
    /// The same bound for all `L` parts of a combination.
    pub analytic_combination_bound: f64,
    pub mean_wall_time_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ProblemConfig,
    pub plan: ReductionPlan,
    pub per_query: Vec<BenchQuery>,
    pub aggregate: BenchAggregate,
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub snapshot: PathBuf,
    pub queries: PathBuf,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub dataset_override: Option<PathBuf>,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    let Loaded { index, dataset, .. } = load_index(&args.snapshot, args.dataset_override.as_deref())?;
    let queries = load_dataset(&args.queries, resolve_format(&args.queries, args.format)?)?;
    let report = bench_index(&index, dataset.points(), queries.points())?;
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_vec_pretty(&report)?).map_err(|e| CliError::io(out, e))?;
    }
    Ok(report)
}

pub fn bench_index(index: &nnwfn_core::Index, points: &[Vec<f64>], queries: &[Vec<f64>]) -> Result<BenchReport, CliError> {
    let config = *index.config();
    let plan = index.plan().clone();
    let limit = config.c * config.radius;
    let per_query = queries
        .par_iter()
        .enumerate()
        .map(|(query, q)| {
            let started = Instant::now();
            let (result, stats) = index.query_with_stats(q)?;
            let wall_time_us = started.elapsed().as_secs_f64() * 1e6;

            let dist: Vec<f64> = points.iter().map(|x| distance(x, q)).collect();
            let far = |id: u32| dist[id as usize] > limit;
            let mut unique = stats.leaf_hits.clone();
            unique.sort_unstable();
            unique.dedup();
            let false_negatives = dist.iter().enumerate().filter(|&(i, &d)| d <= config.radius && !result.contains(i as u32)).count();
            Ok((
                BenchQuery {
                    query,
                    raw_candidates: stats.raw_candidates,
                    leaf_hits: stats.leaf_hits.len(),
                    unique_candidates: stats.unique_candidates,
                    filtered_out: stats.unique_candidates - stats.result_size,
                    result_size: stats.result_size,
                    false_positive_candidates: unique.iter().filter(|&&id| far(id)).count(),
                    false_negatives,
                    wall_time_us,
                },
                stats.leaf_hits.iter().filter(|&&id| far(id)).count(),
                dist.iter().filter(|&&d| d > limit).count(),
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let n_queries = per_query.len();
    let mean = |f: &dyn Fn(&BenchQuery) -> f64| if n_queries == 0 { 0.0 } else { per_query.iter().map(|(q, _, _)| f(q)).sum::<f64>() / n_queries as f64 };
    let far_pairs: usize = per_query.iter().map(|(_, _, f)| f).sum();
    let far_leaf_hits: usize = per_query.iter().map(|(_, h, _)| h).sum();
    let far_candidates: usize = per_query.iter().map(|(q, _, _)| q.false_positive_candidates).sum();
    let combinations = index.combinations().len();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };

    let aggregate = BenchAggregate {
        queries: n_queries,
        combinations,
        total_bucket_entries: index.total_bucket_entries(),
        false_negatives: per_query.iter().map(|(q, _, _)| q.false_negatives).sum(),
        mean_raw_candidates: mean(&|q| q.raw_candidates as f64),
        mean_unique_candidates: mean(&|q| q.unique_candidates as f64),
        mean_result_size: mean(&|q| q.result_size as f64),
        empirical_fp_rate: ratio(far_leaf_hits, far_pairs * combinations),
        empirical_candidate_fp_rate: ratio(far_candidates, far_pairs),
        analytic_single_mapping_bound: plan.single_mapping_bound(config.c),
        analytic_combination_bound: plan.combination_bound(config.c),
        mean_wall_time_us: mean(&|q| q.wall_time_us),
    };
    Ok(BenchReport { config, plan, per_query: per_query.into_iter().map(|(q, _, _)| q).collect(), aggregate })
}
