//! Reduction of Euclidean radius search to max-l₂ instances, and the
//! parameter planner.
//!
//! `L` independent mapping families are drawn in `ℝ^d` with block size `k₂`.
//! Every choice of one block per family is a *combination*; it maps each
//! point `x` to `(A^{(i₁,1)}x, …, A^{(i_L,L)}x) ∈ (ℝ^{k₂})^L`, and those
//! images are stored in a [`MaxL2Index`]. A point with `‖x − q‖ ≤ 1` has,
//! in each family, a block that does not expand `x − q`, so the combination
//! made of those blocks puts `x` within max-l₂ distance 1 of `q` and its
//! bucket holds `x`. Candidates from all combinations are merged and
//! filtered by their true distance.
//!
//! Coordinates are divided by `R` before hashing; all internal thresholds
//! are then 1 and `c`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_finite, padded_dim, MappingFamily};
use crate::lsh::{optimal_w, LshParams, MaxL2Index, ProductPoint, DEFAULT_EXPANSION_BUDGET};
use crate::rng::{stream_rng, Purpose};
use crate::scalar::{distance, Scalar};

/// `D₁ = D₂`, the dimension multipliers of both reduction stages.
pub const PLANNER_CONSTANT: f64 = 16.0;

/// Global instance parameters, radius in input units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub n: usize,
    pub d: usize,
    pub c: f64,
    pub radius: f64,
}

impl ProblemConfig {
    pub fn new(n: usize, d: usize, c: f64, radius: f64) -> Result<Self> {
        let config = Self { n, d, c, radius };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidDimension("d must be at least 1".into()));
        }
        if !(self.c.is_finite() && self.c > 1.0) {
            return Err(Error::InvalidArgument(format!("approximation factor c = {} must be > 1", self.c)));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidArgument(format!("radius R = {} must be > 0", self.radius)));
        }
        Ok(())
    }
}

/// `γ = (2c / (c − α))²`.
pub fn gamma(c: f64, alpha: f64) -> f64 {
    (2.0 * c / (c - alpha)).powi(2)
}

/// Default growth function `f(n) = √(ln n)`, never below 2.
pub fn default_f_n(n: usize) -> f64 {
    (n.max(1) as f64).ln().sqrt().max(2.0)
}

/// Explicit values replacing the planner's choices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanOverrides {
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    #[serde(rename = "L")]
    pub families: Option<usize>,
    pub w: Option<usize>,
}

impl PlanOverrides {
    pub fn is_empty(&self) -> bool {
        self.k1.is_none() && self.k2.is_none() && self.families.is_none() && self.w.is_none()
    }
}

/// Every derived parameter of an index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionPlan {
    /// Approximation after the first stage, `c/2`.
    pub alpha1: f64,
    /// Approximation of the max-l₂ leaves, `c/4`.
    pub alpha2: f64,
    pub gamma: f64,
    pub k1: usize,
    pub k2: usize,
    #[serde(rename = "L")]
    pub families: usize,
    pub w: usize,
    pub f_n: f64,
    pub mu: f64,
    /// Set when any parameter came from [`PlanOverrides`].
    pub forced: bool,
}

impl ReductionPlan {
    /// Max-l₂ threshold used inside every leaf.
    pub fn leaf_cap(&self) -> f64 {
        self.alpha2.max(1.0)
    }

    /// Infimum of the `c` for which leaves with dimension `k2` are solvable, `8√k₂`.
    pub fn min_viable_c(&self) -> f64 {
        8.0 * (self.k2 as f64).sqrt()
    }

    pub fn leaf_feasible(&self) -> bool {
        self.leaf_cap() > 2.0 * (self.k2 as f64).sqrt()
    }

    /// Parameters of the combination leaves.
    pub fn leaf_params(&self) -> Result<LshParams> {
        if self.leaf_feasible() {
            LshParams::new(self.k2, self.families, self.w, self.leaf_cap())
        } else if self.forced {
            LshParams::relaxed(self.k2, self.families, self.w, self.leaf_cap())
        } else {
            Err(Error::ConstraintViolated { c: self.leaf_cap(), tau: 2.0 * (self.k2 as f64).sqrt() })
        }
    }

    /// Number of block mappings per family for inputs of dimension `d`.
    pub fn blocks_per_family(&self, d: usize) -> usize {
        padded_dim(d, self.k2) / self.k2
    }

    /// `blocks^L`, saturating.
    pub fn combination_count(&self, d: usize) -> u128 {
        let blocks = self.blocks_per_family(d) as u128;
        (0..self.families).try_fold(1u128, |acc, _| acc.checked_mul(blocks)).unwrap_or(u128::MAX)
    }

    /// Single-block bound `exp(−k(c−α)²/(2c)²)` on mapping a point at distance `c` within `α`.
    pub fn single_mapping_bound(&self, c: f64) -> f64 {
        mapping_bound(self.k2, 1, c, self.leaf_cap())
    }

    /// Same bound for all `L` parts of one combination at once.
    pub fn combination_bound(&self, c: f64) -> f64 {
        mapping_bound(self.k2, self.families, c, self.leaf_cap())
    }
}

fn mapping_bound(k: usize, parts: usize, c: f64, alpha: f64) -> f64 {
    if alpha >= c {
        return 1.0;
    }
    (-((k * parts) as f64) * ((c - alpha) / (2.0 * c)).powi(2)).exp()
}

struct Draft {
    k1: usize,
    k2: usize,
    families: usize,
    mu: f64,
}

fn draft(config: &ProblemConfig, f_n: f64) -> Result<Draft> {
    config.validate()?;
    if !(f_n.is_finite() && f_n > 1.0) {
        return Err(Error::InvalidArgument(format!("f(n) = {f_n} must be > 1")));
    }
    let ln_n = (config.n.max(1) as f64).ln();
    let ln_ln_n = ln_n.ln();
    let families = if ln_ln_n > 0.0 { ((ln_n / (f_n * ln_ln_n)).ceil() as usize).max(1) } else { 1 };
    let clamp = |v: f64| (v.ceil() as usize).clamp(1, config.d);
    Ok(Draft {
        k1: clamp(PLANNER_CONSTANT * ln_n),
        k2: clamp(PLANNER_CONSTANT * ln_n / families as f64),
        families,
        mu: 8.0 * PLANNER_CONSTANT.sqrt() * (f_n * ln_ln_n.max(0.0)).sqrt(),
    })
}

/// Plans `α₁ = c/2`, `α₂ = c/4`, `k₁ = ⌈16 ln n⌉`, `L = ⌈ln n / (f(n) ln ln n)⌉`,
/// `k₂ = ⌈16 ln n / L⌉` and the optimal `w` for the leaves.
///
/// Fails with [`Error::Infeasible`] unless `c/4 > 2√k₂`.
pub fn plan_parameters(config: &ProblemConfig, f_n: f64) -> Result<ReductionPlan> {
    let draft = draft(config, f_n)?;
    let c = config.c;
    let mut plan = ReductionPlan {
        alpha1: c / 2.0,
        alpha2: c / 4.0,
        gamma: gamma(c, c / 2.0),
        k1: draft.k1,
        k2: draft.k2,
        families: draft.families,
        w: 1,
        f_n,
        mu: draft.mu,
        forced: false,
    };
    if plan.alpha2 <= 2.0 * (plan.k2 as f64).sqrt() {
        return Err(Error::Infeasible { c, min_c: plan.min_viable_c(), k2: plan.k2 });
    }
    plan.w = optimal_w(config.n, plan.k2, plan.alpha2, plan.families)?;
    Ok(plan)
}

/// [`plan_parameters`] with explicit replacements.
///
/// With any override present the plan is marked forced and the leaf
/// solvability condition is not enforced.
pub fn plan_with_overrides(config: &ProblemConfig, f_n: f64, overrides: &PlanOverrides) -> Result<ReductionPlan> {
    if overrides.is_empty() {
        return plan_parameters(config, f_n);
    }
    let draft = draft(config, f_n)?;
    let c = config.c;
    let in_range = |name: &str, v: usize| {
        if v == 0 || v > config.d {
            Err(Error::InvalidArgument(format!("{name} = {v} must lie in [1, {}]", config.d)))
        } else {
            Ok(v)
        }
    };
    let k1 = in_range("k1", overrides.k1.unwrap_or(draft.k1))?;
    let k2 = in_range("k2", overrides.k2.unwrap_or(draft.k2))?;
    let families = overrides.families.unwrap_or(draft.families);
    if families == 0 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    let mut plan = ReductionPlan {
        alpha1: c / 2.0,
        alpha2: c / 4.0,
        gamma: gamma(c, c / 2.0),
        k1,
        k2,
        families,
        w: 1,
        f_n,
        mu: draft.mu,
        forced: true,
    };
    plan.w = match overrides.w {
        Some(0) => return Err(Error::InvalidArgument("w must be at least 1".into())),
        Some(w) => w,
        None => optimal_w(config.n, k2, plan.leaf_cap(), families)?,
    };
    Ok(plan)
}

/// Divides every coordinate by `radius`.
pub fn rescale<T: Scalar>(x: &[T], radius: f64) -> Result<Vec<T>> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {radius} must be > 0")));
    }
    let r = T::of(radius);
    Ok(x.iter().map(|&v| v / r).collect())
}

pub fn rescale_all<T: Scalar, P: AsRef<[T]>>(points: &[P], radius: f64) -> Result<Vec<Vec<T>>> {
    points.iter().map(|p| rescale(p.as_ref(), radius)).collect()
}

/// Returned ids (ascending) with their true distances in input units.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryResult<T> {
    pub ids: Vec<u32>,
    pub distances: Vec<T>,
}

impl<T> QueryResult<T> {
    pub fn contains(&self, id: u32) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Work counters of one query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryStats {
    /// Bucket entries read, summed over combinations.
    pub raw_candidates: usize,
    /// Ids that passed a leaf's max-l₂ filter, one entry per combination that returned them.
    pub leaf_hits: Vec<u32>,
    /// Distinct ids whose true distance was computed.
    pub unique_candidates: usize,
    pub result_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Largest accepted `3^{wL}`.
    pub expansion_budget: u64,
    /// Largest accepted number of combinations.
    pub combo_budget: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { expansion_budget: DEFAULT_EXPANSION_BUDGET, combo_budget: 1 << 16 }
    }
}

/// One max-l₂ instance: a block index per family and the index over the images.
#[derive(Debug, Clone)]
pub struct Combination<T> {
    blocks: Vec<usize>,
    index: MaxL2Index<T>,
}

impl<T: Scalar> Combination<T> {
    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn index(&self) -> &MaxL2Index<T> {
        &self.index
    }
}

/// The full index: `L` families and one max-l₂ instance per block combination.
#[derive(Debug, Clone)]
pub struct NnwfnIndex<T> {
    config: ProblemConfig,
    plan: ReductionPlan,
    seed: u64,
    families: Vec<MappingFamily<T>>,
    combos: Vec<Combination<T>>,
    originals: Vec<Vec<T>>,
}

fn check_points<T: Scalar, P: AsRef<[T]>>(points: &[P], config: &ProblemConfig) -> Result<()> {
    if points.len() != config.n {
        return Err(Error::InvalidArgument(format!("config says n = {}, got {} points", config.n, points.len())));
    }
    if points.len() > u32::MAX as usize {
        return Err(Error::InvalidArgument("more than 2^32 points".into()));
    }
    for p in points {
        let p = p.as_ref();
        if p.len() != config.d {
            return Err(Error::DimensionMismatch { expected: config.d, got: p.len() });
        }
        check_finite(p)?;
    }
    Ok(())
}

fn project_all<T: Scalar>(family: &MappingFamily<T>, normalized: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let k = family.k();
    family
        .blocks()
        .iter()
        .map(|block| {
            let mut out = vec![T::zero(); normalized.len() * k];
            for (x, slot) in normalized.iter().zip(out.chunks_exact_mut(k)) {
                block.apply_into(x, slot)?;
            }
            Ok(out)
        })
        .collect()
}

/// Mixed-radix digits of `code`, first family most significant.
fn decode_combination(mut code: usize, blocks: usize, families: usize) -> Vec<usize> {
    let mut digits = vec![0; families];
    for slot in digits.iter_mut().rev() {
        *slot = code % blocks;
        code /= blocks;
    }
    digits
}

/// Builds the index with default budgets.
pub fn build_index<T: Scalar, P: AsRef<[T]>>(points: &[P], config: &ProblemConfig, plan: &ReductionPlan, seed: u64) -> Result<NnwfnIndex<T>> {
    NnwfnIndex::build(points, config, plan, seed, &BuildOptions::default())
}

impl<T: Scalar> NnwfnIndex<T> {
    pub fn build<P: AsRef<[T]>>(points: &[P], config: &ProblemConfig, plan: &ReductionPlan, seed: u64, options: &BuildOptions) -> Result<Self> {
        config.validate()?;
        check_points(points, config)?;
        if plan.k2 == 0 || plan.k2 > config.d {
            return Err(Error::InvalidBlockSize { k: plan.k2, dim: config.d });
        }
        let params = plan.leaf_params()?;
        if params.expansion() > options.expansion_budget {
            return Err(Error::Budget {
                what: "3^(wL) buckets per point",
                required: params.expansion() as u128,
                limit: options.expansion_budget as u128,
            });
        }
        let combo_count = plan.combination_count(config.d);
        if combo_count > options.combo_budget as u128 {
            return Err(Error::Budget { what: "block combinations", required: combo_count, limit: options.combo_budget as u128 });
        }
        let combo_count = combo_count as usize;

        let normalized = rescale_all(points, config.radius)?;
        let families = (0..plan.families)
            .map(|j| MappingFamily::random(config.d, plan.k2, seed, j))
            .collect::<Result<Vec<_>>>()?;
        let projections = families.iter().map(|f| project_all(f, &normalized)).collect::<Result<Vec<_>>>()?;

        let k = plan.k2;
        let blocks = plan.blocks_per_family(config.d);
        let combos = (0..combo_count)
            .into_par_iter()
            .map(|code| {
                let choice = decode_combination(code, blocks, plan.families);
                let images = (0..normalized.len())
                    .map(|x| {
                        let coords = choice
                            .iter()
                            .enumerate()
                            .flat_map(|(j, &i)| projections[j][i][x * k..(x + 1) * k].iter().copied())
                            .collect();
                        ProductPoint::from_flat(x as u32, k, coords)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut rng = stream_rng(seed, Purpose::HashVectors, code as u64);
                let index = MaxL2Index::build_with_budget(images, params.clone(), &mut rng, options.expansion_budget)?;
                Ok(Combination { blocks: choice, index })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            config: *config,
            plan: plan.clone(),
            seed,
            families,
            combos,
            originals: points.iter().map(|p| p.as_ref().to_vec()).collect(),
        })
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.config
    }

    pub fn plan(&self) -> &ReductionPlan {
        &self.plan
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn families(&self) -> &[MappingFamily<T>] {
        &self.families
    }

    pub fn combinations(&self) -> &[Combination<T>] {
        &self.combos
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.originals
    }

    pub fn len(&self) -> usize {
        self.originals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.originals.is_empty()
    }

    pub fn total_bucket_entries(&self) -> usize {
        self.combos.iter().map(|c| c.index.total_bucket_entries()).sum()
    }

    pub fn query(&self, q: &[T]) -> Result<QueryResult<T>> {
        Ok(self.query_with_stats(q)?.0)
    }

    pub fn query_with_stats(&self, q: &[T]) -> Result<(QueryResult<T>, QueryStats)> {
        if q.len() != self.config.d {
            return Err(Error::DimensionMismatch { expected: self.config.d, got: q.len() });
        }
        check_finite(q)?;
        let qn = rescale(q, self.config.radius)?;
        let images = self.families.iter().map(|f| f.apply_all(&qn)).collect::<Result<Vec<_>>>()?;
        let cap = self.plan.leaf_cap();

        let mut stats = QueryStats::default();
        let mut seen = vec![false; self.originals.len()];
        for combo in &self.combos {
            let coords = combo.blocks.iter().enumerate().flat_map(|(j, &i)| images[j][i].iter().copied()).collect();
            let qp = ProductPoint::from_flat(u32::MAX, self.plan.k2, coords)?;
            let (ids, raw) = combo.index.query_counted(&qp, 1.0, cap)?;
            stats.raw_candidates += raw;
            for &id in &ids {
                seen[id as usize] = true;
            }
            stats.leaf_hits.extend(ids);
        }

        let limit = T::of(self.config.c * self.config.radius);
        let mut result = QueryResult::default();
        for (id, _) in seen.iter().enumerate().filter(|(_, &s)| s) {
            stats.unique_candidates += 1;
            let dist = distance(&self.originals[id], q);
            if dist <= limit {
                result.ids.push(id as u32);
                result.distances.push(dist);
            }
        }
        stats.result_size = result.ids.len();
        Ok((result, stats))
    }

    /// Removes a point from every bucket of every combination. Fault-injection hook.
    #[doc(hidden)]
    pub fn drop_from_buckets(&mut self, id: u32) -> usize {
        self.combos.iter_mut().map(|c| c.index.drop_from_buckets(id)).sum()
    }
}

/// One family of blocks, each indexed by a single-part max-l₂ leaf.
#[derive(Debug, Clone)]
pub struct SingleStageIndex<T> {
    config: ProblemConfig,
    alpha: f64,
    family: MappingFamily<T>,
    leaves: Vec<MaxL2Index<T>>,
    originals: Vec<Vec<T>>,
}

/// Reduces the problem to `⌈d/k⌉` instances of approximation `alpha` in dimension `k`.
///
/// Needs `1 < alpha < c`, `1 <= k <= d` and `alpha > 2√k` for the leaves.
pub fn build_single_stage<T: Scalar, P: AsRef<[T]>>(points: &[P], config: &ProblemConfig, alpha: f64, k: usize, seed: u64) -> Result<SingleStageIndex<T>> {
    config.validate()?;
    check_points(points, config)?;
    if !(alpha > 1.0 && alpha < config.c) {
        return Err(Error::InvalidArgument(format!("need 1 < alpha ({alpha}) < c ({})", config.c)));
    }
    if k == 0 || k > config.d {
        return Err(Error::InvalidBlockSize { k, dim: config.d });
    }
    let w = optimal_w(config.n, k, alpha, 1)?;
    let params = LshParams::new(k, 1, w, alpha)?;
    let normalized = rescale_all(points, config.radius)?;
    let family = MappingFamily::random(config.d, k, seed, 0)?;
    let projections = project_all(&family, &normalized)?;
    let leaves = projections
        .into_iter()
        .enumerate()
        .map(|(i, flat)| {
            let images = flat
                .chunks_exact(k)
                .enumerate()
                .map(|(x, part)| ProductPoint::from_flat(x as u32, k, part.to_vec()))
                .collect::<Result<Vec<_>>>()?;
            MaxL2Index::build(images, params.clone(), &mut stream_rng(seed, Purpose::HashVectors, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SingleStageIndex {
        config: *config,
        alpha,
        family,
        leaves,
        originals: points.iter().map(|p| p.as_ref().to_vec()).collect(),
    })
}

impl<T: Scalar> SingleStageIndex<T> {
    pub fn family(&self) -> &MappingFamily<T> {
        &self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Ids each block's leaf returns for `q`, in block order.
    pub fn block_hits(&self, q: &[T]) -> Result<Vec<Vec<u32>>> {
        if q.len() != self.config.d {
            return Err(Error::DimensionMismatch { expected: self.config.d, got: q.len() });
        }
        check_finite(q)?;
        let qn = rescale(q, self.config.radius)?;
        self.family
            .blocks()
            .iter()
            .zip(&self.leaves)
            .map(|(block, leaf)| {
                let qp = ProductPoint::from_flat(u32::MAX, self.family.k(), block.apply(&qn)?)?;
                leaf.query(&qp, 1.0, self.alpha)
            })
            .collect()
    }

    pub fn query(&self, q: &[T]) -> Result<QueryResult<T>> {
        let mut ids: Vec<u32> = self.block_hits(q)?.into_iter().flatten().collect();
        ids.sort_unstable();
        ids.dedup();
        let limit = T::of(self.config.c * self.config.radius);
        let mut result = QueryResult::default();
        for id in ids {
            let dist = distance(&self.originals[id as usize], q);
            if dist <= limit {
                result.ids.push(id);
                result.distances.push(dist);
            }
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_radius_search;
    use crate::scalar::norm;
    use rand::Rng;

    fn cloud(n: usize, d: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, Purpose::Workload, 99);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-spread..spread)).collect()).collect()
    }

    fn point_at(center: &[f64], dist: f64, rng: &mut impl Rng) -> Vec<f64> {
        let dir: Vec<f64> = crate::lsh::sample_unit_vector(center.len(), rng).unwrap();
        center.iter().zip(dir).map(|(c, u)| c + dist * u).collect()
    }

    fn forced(config: &ProblemConfig, k2: usize, families: usize, w: usize) -> ReductionPlan {
        plan_with_overrides(config, 2.0, &PlanOverrides { k1: None, k2: Some(k2), families: Some(families), w: Some(w) }).unwrap()
    }

    #[test]
    fn gamma_at_half_c_is_16() {
        for c in [2.0, 8.0, 100.0] {
            assert_eq!(gamma(c, c / 2.0), 16.0);
        }
    }

    #[test]
    fn plan_l_for_a_million_points() {
        let config = ProblemConfig::new(1_000_000, 10_000, 1000.0, 1.0).unwrap();
        let plan = plan_parameters(&config, 2.0).unwrap();
        assert_eq!(plan.families, 3);
        assert_eq!(plan.k1, 222);
        assert_eq!(plan.k2, 74);
        assert_eq!(plan.gamma, 16.0);
        assert_eq!(plan.alpha1, 500.0);
        assert_eq!(plan.alpha2, 250.0);
        assert!(!plan.forced);
    }

    #[test]
    fn plan_for_two_points_clamps_l() {
        let config = ProblemConfig::new(2, 4, 100.0, 1.0).unwrap();
        let plan = plan_parameters(&config, 2.0).unwrap();
        assert_eq!(plan.families, 1);
        assert!(plan.k2 >= 1 && plan.w >= 1);
    }

    #[test]
    fn infeasible_plan_names_minimal_c() {
        let config = ProblemConfig::new(1000, 32, 8.0, 1.0).unwrap();
        match plan_parameters(&config, default_f_n(1000)) {
            Err(Error::Infeasible { min_c, k2, .. }) => {
                assert_eq!(min_c, 8.0 * (k2 as f64).sqrt());
                assert!(min_c > 8.0);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn overrides_are_echoed() {
        let config = ProblemConfig::new(1000, 32, 8.0, 1.0).unwrap();
        let plan = forced(&config, 4, 2, 2);
        assert_eq!((plan.k2, plan.families, plan.w, plan.forced), (4, 2, 2, true));
        assert!(plan.leaf_params().is_ok());
        let bad = PlanOverrides { k2: Some(33), ..Default::default() };
        assert!(plan_with_overrides(&config, 2.0, &bad).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ProblemConfig::new(10, 0, 2.0, 1.0).is_err());
        assert!(ProblemConfig::new(10, 3, 1.0, 1.0).is_err());
        assert!(ProblemConfig::new(10, 3, 2.0, 0.0).is_err());
        assert!(ProblemConfig::new(0, 3, 2.0, 1.0).is_ok());
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale(&[1.5, -2.0], 1.0).unwrap(), vec![1.5, -2.0]);
        assert_eq!(rescale(&[2.0, 0.0], 2.0).unwrap(), vec![1.0, 0.0]);
        let x = [0.3f64, -7.1, 123.456];
        let back = rescale(&rescale(&x, 3.7).unwrap(), 1.0 / 3.7).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        assert!(rescale(&x, 0.0).is_err());
        assert!(rescale(&x, -1.0).is_err());
    }

    #[test]
    fn one_family_gives_one_combination_per_block() {
        let pts = cloud(50, 8, 5.0, 1);
        let config = ProblemConfig::new(50, 8, 8.0, 1.0).unwrap();
        let index = build_index(&pts, &config, &forced(&config, 4, 1, 1), 3).unwrap();
        assert_eq!(index.combinations().len(), 2);
        let index = build_index(&pts, &config, &forced(&config, 4, 3, 1), 3).unwrap();
        assert_eq!(index.combinations().len(), 8);
        assert_eq!(index.combinations()[5].blocks(), &[1, 0, 1]);
    }

    #[test]
    fn combo_budget_is_enforced() {
        let pts = cloud(5, 16, 1.0, 2);
        let config = ProblemConfig::new(5, 16, 8.0, 1.0).unwrap();
        let opts = BuildOptions { combo_budget: 100, ..Default::default() };
        let err = NnwfnIndex::<f64>::build(&pts, &config, &forced(&config, 2, 3, 1), 0, &opts).unwrap_err();
        assert!(matches!(err, Error::Budget { required: 512, .. }));
    }

    #[test]
    fn empty_input() {
        let pts: Vec<Vec<f64>> = vec![];
        let config = ProblemConfig::new(0, 4, 8.0, 1.0).unwrap();
        let index = build_index(&pts, &config, &forced(&config, 2, 2, 1), 0).unwrap();
        assert!(index.query(&[0.0; 4]).unwrap().is_empty());
    }

    #[test]
    fn query_errors() {
        let pts = cloud(10, 4, 1.0, 3);
        let config = ProblemConfig::new(10, 4, 8.0, 1.0).unwrap();
        let index = build_index(&pts, &config, &forced(&config, 2, 1, 1), 0).unwrap();
        assert_eq!(index.query(&[0.0; 3]).unwrap_err(), Error::DimensionMismatch { expected: 4, got: 3 });
        assert!(index.query(&[0.0, f64::INFINITY, 0.0, 0.0]).is_err());
        let bad_n = ProblemConfig::new(9, 4, 8.0, 1.0).unwrap();
        assert!(build_index(&pts, &bad_n, &forced(&bad_n, 2, 1, 1), 0).is_err());
    }

    #[test]
    fn query_on_stored_point_and_far_query() {
        let pts = cloud(200, 16, 20.0, 4);
        let config = ProblemConfig::new(200, 16, 8.0, 1.5).unwrap();
        let index = build_index(&pts, &config, &forced(&config, 4, 2, 1), 11).unwrap();
        let r = index.query(&pts[17]).unwrap();
        assert!(r.contains(17));
        assert_eq!(r.distances[r.ids.iter().position(|&i| i == 17).unwrap()], 0.0);
        let far = vec![1000.0; 16];
        assert!(index.query(&far).unwrap().is_empty());
    }

    #[test]
    fn planted_pair_n500_d32() {
        let mut pts = cloud(499, 32, 10.0, 5);
        let mut rng = stream_rng(5, Purpose::Workload, 1);
        let q: Vec<f64> = (0..32).map(|_| rng.random_range(-10.0..10.0)).collect();
        pts.push(point_at(&q, 0.8, &mut rng));
        let config = ProblemConfig::new(500, 32, 8.0, 1.0).unwrap();
        let index = build_index(&pts, &config, &forced(&config, 8, 2, 1), 21).unwrap();
        let got = index.query(&q).unwrap();
        let want = exact_radius_search(&pts, &q, 1.0).unwrap();
        assert!(want.contains(&499));
        for id in want {
            assert!(got.contains(id));
        }
    }

    #[test]
    fn ten_planted_neighbors_n2000_d64() {
        let mut pts = cloud(1990, 64, 10.0, 6);
        let mut rng = stream_rng(6, Purpose::Workload, 1);
        let q: Vec<f64> = (0..64).map(|_| rng.random_range(-10.0..10.0)).collect();
        for t in 0..10 {
            let dist = 0.3 + (0.99 - 0.3) * t as f64 / 9.0;
            pts.push(point_at(&q, dist, &mut rng));
        }
        let config = ProblemConfig::new(2000, 64, 8.0, 1.0).unwrap();
        let index = build_index(&pts, &config, &forced(&config, 16, 2, 1), 8).unwrap();
        let got = index.query(&q).unwrap();
        for id in 1990..2000 {
            assert!(got.contains(id), "planted {id} missing");
        }
        let cap = exact_radius_search(&pts, &q, 8.0).unwrap();
        assert!(got.ids.iter().all(|id| cap.contains(id)));
    }

    #[test]
    fn some_combination_contracts_every_close_difference() {
        let mut rng = stream_rng(7, Purpose::Workload, 0);
        let config = ProblemConfig::new(0, 12, 8.0, 1.0).unwrap();
        let index = build_index::<f64, Vec<f64>>(&[], &config, &forced(&config, 4, 2, 1), 13).unwrap();
        for _ in 0..200 {
            let len = rng.random_range(0.0..1.0);
            let diff: Vec<f64> = point_at(&[0.0; 12], len, &mut rng);
            let found = index.combinations().iter().any(|combo| {
                combo.blocks().iter().enumerate().all(|(j, &i)| norm(&index.families()[j].blocks()[i].apply(&diff).unwrap()) <= 1.0)
            });
            assert!(found);
        }
    }

    #[test]
    fn determinism() {
        let pts = cloud(300, 16, 5.0, 8);
        let config = ProblemConfig::new(300, 16, 8.0, 1.0).unwrap();
        let plan = forced(&config, 4, 2, 1);
        let a = build_index(&pts, &config, &plan, 77).unwrap();
        let b = build_index(&pts, &config, &plan, 77).unwrap();
        for (ca, cb) in a.combinations().iter().zip(b.combinations()) {
            assert_eq!(ca.index().sorted_buckets(), cb.index().sorted_buckets());
        }
        for q in pts.iter().take(20) {
            assert_eq!(a.query(q).unwrap(), b.query(q).unwrap());
        }
    }

    #[test]
    fn bucket_entries_81n() {
        let pts = cloud(40, 8, 5.0, 9);
        let config = ProblemConfig::new(40, 8, 8.0, 1.0).unwrap();
        let index = build_index(&pts, &config, &forced(&config, 4, 2, 2), 1).unwrap();
        for combo in index.combinations() {
            assert_eq!(combo.index().total_bucket_entries(), 81 * 40);
        }
    }

    #[test]
    fn f32_index_finds_stored_points() {
        let pts: Vec<Vec<f32>> = cloud(100, 8, 5.0, 10).into_iter().map(|p| p.into_iter().map(|v| v as f32).collect()).collect();
        let config = ProblemConfig::new(100, 8, 8.0, 1.0).unwrap();
        let index: NnwfnIndex<f32> = build_index(&pts, &config, &forced(&config, 4, 2, 1), 2).unwrap();
        for (i, p) in pts.iter().enumerate() {
            assert!(index.query(p).unwrap().contains(i as u32));
        }
    }

    #[test]
    fn single_stage_with_one_block() {
        let pts = cloud(60, 4, 10.0, 11);
        let config = ProblemConfig::new(60, 4, 12.0, 1.0).unwrap();
        let index = build_single_stage(&pts, &config, 6.0, 4, 3).unwrap();
        assert_eq!(index.family().len(), 1);
        for (i, p) in pts.iter().enumerate() {
            assert!(index.query(p).unwrap().contains(i as u32));
        }
    }

    #[test]
    fn single_stage_planted_neighbor_hits_a_block() {
        for seed in 0..30 {
            let mut pts = cloud(99, 16, 10.0, 100 + seed);
            let mut rng = stream_rng(seed, Purpose::Workload, 3);
            let q: Vec<f64> = (0..16).map(|_| rng.random_range(-10.0..10.0)).collect();
            pts.push(point_at(&q, 0.9, &mut rng));
            let config = ProblemConfig::new(100, 16, 12.0, 1.0).unwrap();
            let index = build_single_stage(&pts, &config, 6.0, 4, seed).unwrap();
            let hits = index.block_hits(&q).unwrap();
            assert!(hits.iter().any(|h| h.contains(&99)), "seed {seed}");
            assert!(index.query(&q).unwrap().contains(99));
        }
    }

    #[test]
    fn single_stage_parameter_errors() {
        let pts = cloud(10, 8, 1.0, 12);
        let config = ProblemConfig::new(10, 8, 12.0, 1.0).unwrap();
        assert!(build_single_stage::<f64, _>(&pts, &config, 12.0, 4, 0).is_err());
        assert!(build_single_stage::<f64, _>(&pts, &config, 1.0, 4, 0).is_err());
        assert!(build_single_stage::<f64, _>(&pts, &config, 6.0, 9, 0).is_err());
        assert!(matches!(build_single_stage::<f64, _>(&pts, &config, 3.0, 4, 0), Err(Error::ConstraintViolated { .. })));
    }
}
