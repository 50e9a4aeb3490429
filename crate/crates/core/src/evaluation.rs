//! The privacy/utility experiment: per-user train/test split, forgery-rate
//! sweep per strategy, precision at V and risk aggregates.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::folksonomy::Folksonomy;
use crate::forgery::{apparent_profile, ForgeryConfig, Strategy};
use crate::privacy::kl_bits;
use crate::profiles::{
    all_item_profiles, all_user_profiles, population_profile, restrict_to_training, PopulationMode, Profile,
};
use crate::recommender::{CandidatePool, RankedList};

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.8;
pub const DEFAULT_TOP_V: [usize; 2] = [30, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Train,
    Test,
}

/// Per-user partition of each user's distinct items into train and test.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    seed: u64,
    fraction: f64,
    train: Vec<Vec<usize>>,
    test: Vec<Vec<usize>>,
}

impl SplitAssignment {
    /// Builds an assignment from explicit per-user train/test item indices.
    pub fn from_parts(seed: u64, fraction: f64, mut train: Vec<Vec<usize>>, mut test: Vec<Vec<usize>>) -> Result<Self> {
        if train.len() != test.len() {
            return Err(Error::Validation("train and test lists cover different users".into()));
        }
        for (tr, te) in train.iter_mut().zip(test.iter_mut()) {
            tr.sort_unstable();
            te.sort_unstable();
            if tr.iter().any(|i| te.binary_search(i).is_ok()) {
                return Err(Error::Validation("an item is both train and test for one user".into()));
            }
        }
        Ok(Self {
            seed,
            fraction,
            train,
            test,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn num_users(&self) -> usize {
        self.train.len()
    }

    pub fn side(&self, user: usize, item: usize) -> Option<Side> {
        if self.train.get(user)?.binary_search(&item).is_ok() {
            Some(Side::Train)
        } else if self.test.get(user)?.binary_search(&item).is_ok() {
            Some(Side::Test)
        } else {
            None
        }
    }

    pub fn train_items(&self, user: usize) -> &[usize] {
        &self.train[user]
    }

    pub fn test_items(&self, user: usize) -> &[usize] {
        &self.test[user]
    }
}

/// Number of training items for a user with `n` distinct items:
/// `ceil(fraction * n)`, with a guard against `0.8 * 15 = 12.000000000000002`.
pub fn train_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

pub fn make_split(f: &Folksonomy, seed: u64) -> SplitAssignment {
    make_split_with_fraction(f, seed, DEFAULT_SPLIT_FRACTION).expect("default fraction is valid")
}

/// Shuffles each user's distinct items (users in identifier order, items in
/// identifier order before shuffling) with one seeded PCG stream and keeps
/// the first `train_count` as training.
pub fn make_split_with_fraction(f: &Folksonomy, seed: u64, fraction: f64) -> Result<SplitAssignment> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction {} outside (0, 1)", fraction)));
    }
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut train = Vec::with_capacity(f.users().len());
    let mut test = Vec::with_capacity(f.users().len());
    for mut items in f.user_items() {
        items.shuffle(&mut rng);
        let k = train_count(items.len(), fraction);
        let mut te = items.split_off(k);
        items.sort_unstable();
        te.sort_unstable();
        train.push(items);
        test.push(te);
    }
    Ok(SplitAssignment {
        seed,
        fraction,
        train,
        test,
    })
}

/// Fraction of the first `v` ranked items that are relevant. The
/// denominator is `v` even when the list is shorter.
pub fn precision_at_v(ranked: &RankedList, relevant: &HashSet<String>, v: usize) -> Result<f64> {
    if v == 0 {
        return Err(Error::Config("V must be positive".into()));
    }
    let hits = ranked.items().take(v).filter(|i| relevant.contains(*i)).count();
    Ok(hits as f64 / v as f64)
}

/// Per-user result of one `(strategy, rho)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserOutcome {
    pub user: String,
    pub initial_risk: f64,
    pub final_risk: f64,
    /// Hits in the top V, aligned with the sweep's V list.
    pub hits: Vec<usize>,
    pub test_size: usize,
}

/// Fraction of users whose final risk is strictly larger than their initial
/// risk; zero for an empty slice.
pub fn count_risk_increases(outcomes: &[UserOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    let increased = outcomes.iter().filter(|o| o.final_risk > o.initial_risk).count();
    increased as f64 / outcomes.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub strategy: Strategy,
    pub rho: f64,
    pub mean_initial_risk: f64,
    pub mean_final_risk: f64,
    pub mean_risk_reduction: f64,
    pub frac_users_risk_increased: f64,
    /// `(V, mean P@V)` pairs in the sweep's V order.
    pub precision: Vec<(usize, f64)>,
    pub num_users_evaluated: usize,
    pub num_infinite_risk: usize,
}

impl SweepResult {
    pub fn p_at(&self, v: usize) -> Option<f64> {
        self.precision.iter().find(|(k, _)| *k == v).map(|(_, p)| *p)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PoolMode {
    /// Every user is ranked against the union of all users' test items.
    #[default]
    Global,
    /// Each user is ranked against their own test items only.
    PerUser,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Strategy templates; their own rate is replaced by each grid value.
    pub strategies: Vec<ForgeryConfig>,
    pub rho_grid: Vec<f64>,
    pub top_v: Vec<usize>,
    pub population_mode: PopulationMode,
    pub smoothing: Option<f64>,
    pub pool: PoolMode,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub keep_outcomes: bool,
}

impl SweepConfig {
    pub fn new(strategies: Vec<ForgeryConfig>, rho_grid: Vec<f64>) -> Self {
        Self {
            strategies,
            rho_grid,
            top_v: DEFAULT_TOP_V.to_vec(),
            population_mode: PopulationMode::default(),
            smoothing: None,
            pool: PoolMode::default(),
            threads: None,
            keep_outcomes: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies to sweep".into()));
        }
        if self.rho_grid.is_empty() {
            return Err(Error::Config("empty forgery-rate grid".into()));
        }
        if let Some(r) = self.rho_grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!("forgery rate {} outside [0, 1]", r)));
        }
        if self.top_v.is_empty() || self.top_v.contains(&0) {
            return Err(Error::Config("V list must be non-empty and positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        Ok(())
    }
}

/// Per-user outcomes of one sweep cell.
#[derive(Debug, Clone)]
pub struct CellOutcomes {
    pub strategy: Strategy,
    pub rho: f64,
    pub outcomes: Vec<UserOutcome>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub population: Profile,
    pub results: Vec<SweepResult>,
    /// Filled only when `keep_outcomes` is set.
    pub outcomes: Vec<CellOutcomes>,
}

struct UserContext {
    name: String,
    profile: Profile,
    initial_risk: f64,
    /// Folksonomy indices of the user's test items, sorted.
    test_items: Vec<usize>,
    pool: Option<Arc<RankingPool>>,
}

struct RankingPool {
    candidates: CandidatePool,
    /// Folksonomy item index for each pool position.
    item_of: Vec<usize>,
}

impl RankingPool {
    fn build(f: &Folksonomy, items: &[usize], profiles: &[Option<Profile>]) -> Self {
        // folksonomy items are sorted by identifier, so pool positions and
        // sorted item indices line up
        let mut items = items.to_vec();
        items.sort_unstable();
        items.dedup();
        let candidates = CandidatePool::new(items.iter().map(|&i| (f.items()[i].clone(), profiles[i].clone())));
        Self {
            candidates,
            item_of: items,
        }
    }
}

/// Runs every `(strategy, rho)` cell of the experiment.
///
/// Training profiles and the population reference come from the training
/// rows only; the population is never recomputed from forged profiles.
/// Privacy aggregates cover every user with a training profile; utility
/// aggregates cover users with at least one test item.
pub fn run_sweep(f: &Folksonomy, split: &SplitAssignment, config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    if split.num_users() != f.users().len() {
        return Err(Error::Validation("split was made for a different folksonomy".into()));
    }
    let train = restrict_to_training(f, split)?;
    let mut population = population_profile(&train, config.population_mode)?;
    if let Some(eps) = config.smoothing {
        population = population.smoothed(eps)?;
    }
    let item_profiles = all_item_profiles(&train);

    let global_pool = match config.pool {
        PoolMode::Global => {
            let all_test: Vec<usize> = (0..f.users().len())
                .flat_map(|u| split.test_items(u).iter().copied())
                .collect();
            Some(Arc::new(RankingPool::build(f, &all_test, &item_profiles)))
        }
        PoolMode::PerUser => None,
    };

    let users: Vec<UserContext> = all_user_profiles(&train)
        .into_iter()
        .enumerate()
        .filter_map(|(u, profile)| profile.map(|p| (u, p)))
        .map(|(u, profile)| {
            let test_items = split.test_items(u).to_vec();
            let pool = match &global_pool {
                Some(pool) => Some(Arc::clone(pool)),
                None if test_items.is_empty() => None,
                None => Some(Arc::new(RankingPool::build(f, &test_items, &item_profiles))),
            };
            UserContext {
                name: f.users()[u].clone(),
                initial_risk: kl_bits(profile.components(), population.components()),
                profile,
                test_items,
                pool,
            }
        })
        .collect();

    let thread_pool = match config.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {} worker threads: {}", n, e)))?,
        ),
        None => None,
    };
    let max_v = config.top_v.iter().copied().max().unwrap_or(0);

    let mut results = Vec::new();
    let mut kept = Vec::new();
    for template in &config.strategies {
        for &rho in &config.rho_grid {
            let cell = template.with_rho(rho)?;
            let evaluate = || -> Result<Vec<UserOutcome>> {
                users
                    .par_iter()
                    .map(|user| evaluate_user(user, &population, &cell, &config.top_v, max_v))
                    .collect()
            };
            let outcomes = match &thread_pool {
                Some(pool) => pool.install(evaluate)?,
                None => evaluate()?,
            };
            results.push(aggregate(cell.strategy(), rho, &outcomes, &config.top_v));
            if config.keep_outcomes {
                kept.push(CellOutcomes {
                    strategy: cell.strategy(),
                    rho,
                    outcomes,
                });
            }
        }
    }

    Ok(SweepReport {
        population,
        results,
        outcomes: kept,
    })
}

fn evaluate_user(
    user: &UserContext,
    population: &Profile,
    cell: &ForgeryConfig,
    top_v: &[usize],
    max_v: usize,
) -> Result<UserOutcome> {
    let apparent = apparent_profile(&user.profile, population, cell)?;
    let final_risk = kl_bits(apparent.components(), population.components());
    let hits = match &user.pool {
        Some(pool) if !user.test_items.is_empty() => {
            let relevant: Vec<bool> = pool
                .candidates
                .top(apparent.components(), max_v)
                .iter()
                .map(|(pos, _)| user.test_items.binary_search(&pool.item_of[*pos]).is_ok())
                .collect();
            top_v
                .iter()
                .map(|&v| relevant.iter().take(v).filter(|r| **r).count())
                .collect()
        }
        _ => vec![0; top_v.len()],
    };
    Ok(UserOutcome {
        user: user.name.clone(),
        initial_risk: user.initial_risk,
        final_risk,
        hits,
        test_size: user.test_items.len(),
    })
}

fn aggregate(strategy: Strategy, rho: f64, outcomes: &[UserOutcome], top_v: &[usize]) -> SweepResult {
    let initial: Vec<f64> = outcomes
        .iter()
        .map(|o| o.initial_risk)
        .filter(|r| r.is_finite())
        .collect();
    let finals: Vec<f64> = outcomes
        .iter()
        .map(|o| o.final_risk)
        .filter(|r| r.is_finite())
        .collect();
    let reductions: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.initial_risk.is_finite() && o.initial_risk > 0.0 && o.final_risk.is_finite())
        .map(|o| (o.initial_risk - o.final_risk) / o.initial_risk)
        .collect();
    let evaluated: Vec<&UserOutcome> = outcomes.iter().filter(|o| o.test_size > 0).collect();
    let precision = top_v
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let per_user: Vec<f64> = evaluated.iter().map(|o| o.hits[k] as f64 / v as f64).collect();
            (v, stable_mean(per_user))
        })
        .collect();

    SweepResult {
        strategy,
        rho,
        mean_initial_risk: stable_mean(initial),
        mean_final_risk: stable_mean(finals),
        mean_risk_reduction: stable_mean(reductions),
        frac_users_risk_increased: count_risk_increases(outcomes),
        precision,
        num_users_evaluated: evaluated.len(),
        num_infinite_risk: outcomes.iter().filter(|o| o.final_risk.is_infinite()).count(),
    }
}

/// Mean that does not depend on the order of `values`: sorted, then summed
/// with Neumaier compensation. NaN for an empty input.
pub fn stable_mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_unstable_by(f64::total_cmp);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in &values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    (sum + comp) / values.len() as f64
}

/// The 21-point grid 0, 0.05, …, 1.
pub fn coarse_rho_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// The coarse grid merged with a dense 0.0125-step grid over [0, 0.25].
pub fn default_rho_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = coarse_rho_grid()
        .into_iter()
        .chain((0..=20).map(|i| i as f64 / 80.0))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Parses either a comma list (`0,0.1,0.5`) or a range `start:stop:step`
/// (inclusive of `stop` when it lies on the step lattice).
pub fn parse_rho_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    let bad = |what: &str| Error::Config(format!("invalid rho grid {:?}: {}", spec, what));
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("expected start:stop:step"))?;
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad("step must be positive and stop >= start"));
        }
        let steps = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=steps)
            .map(|k| start + (k as f64) * step)
            .map(|r| snap(r, stop))
            .collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("expected comma-separated numbers"))?
    };
    if grid.is_empty() {
        return Err(bad("no values"));
    }
    if let Some(r) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(bad(&format!("{} outside [0, 1]", r)));
    }
    Ok(grid)
}

/// Rounds accumulated range values like 0.15000000000000002 to the nearest
/// 12-digit decimal, and pins the endpoint.
fn snap(r: f64, stop: f64) -> f64 {
    if (r - stop).abs() < 1e-12 {
        return stop;
    }
    let snapped: f64 = format!("{:.12}", r).parse().expect("formatted float parses");
    snapped
}
