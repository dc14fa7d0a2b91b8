//! Cross-validated experiment execution: fold construction, accuracy and
//! popularity-bias metrics, and Mann-Whitney significance marking.
//!
//! The protocol per scenario: synthesize ratings once, split users into
//! `n_folds` folds (the split depends only on the interaction structure
//! and the fold seed, so every scenario and configuration shares it), and
//! for each configuration train on everything except the fold's held-out
//! ratings, recommend `top_n` items to each test user, and score.
//!
//! Per-user ARP and PL samples pool across folds; PopCorr and AggDiv are
//! computed per fold against that fold's training popularity and averaged.
//! Within a scenario the configuration with the highest mean ARP (and
//! separately PL) anchors the significance tests: every other
//! configuration is marked when its per-user sample is significantly lower
//! (two-sided Mann-Whitney, p < 0.005).

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{InteractionSkeleton, ItemId, ItemPopularity, RatingDataset, UserId};
use crate::error::{Error, Result};
use crate::knn::{fit, tune_k_with_report, KnnConfig};
use crate::scalar::Real;
use crate::stats::{mann_whitney_u, pearson};
use crate::synth::{synthesize_ratings, ScenarioSpec};

pub use crate::stats::{mann_whitney_exact, mann_whitney_normal_approx, MannWhitney};

/// Significance level of the Mann-Whitney marking.
pub const SIGNIFICANCE_ALPHA: f64 = 0.005;

/// User-to-fold assignment plus each user's held-out items.
///
/// Depends only on the interaction structure and the seed, never on rating
/// values, so one plan serves every scenario built on the same skeleton.
/// Held-out items are always a strict subset of the user's profile;
/// single-rating users hold out nothing and are skipped by test metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    n_folds: usize,
    assignments: BTreeMap<UserId, usize>,
    holdout: BTreeMap<UserId, BTreeSet<ItemId>>,
    seed: u64,
}

/// Shuffles users into `n_folds` round-robin folds and picks each user's
/// held-out ratings (nearest integer to `holdout_frac` of the profile, at
/// least one for profiles of two or more) from one seeded stream.
pub fn make_folds(
    skeleton: &InteractionSkeleton,
    n_folds: usize,
    holdout_frac: f64,
    seed: u64,
) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_folds {n_folds} must be at least 2"
        )));
    }
    if n_folds > skeleton.num_users() {
        return Err(Error::InvalidParameter(format!(
            "n_folds {n_folds} exceeds {} users",
            skeleton.num_users()
        )));
    }
    if !(holdout_frac > 0.0 && holdout_frac <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "holdout fraction {holdout_frac} outside (0, 1]"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<&UserId> = skeleton.users().iter().collect();
    order.shuffle(&mut rng);
    let assignments: BTreeMap<UserId, usize> = order
        .iter()
        .enumerate()
        .map(|(pos, user)| ((*user).clone(), pos % n_folds))
        .collect();

    // Per-user holdout draws in ascending user order.
    let mut holdout: BTreeMap<UserId, BTreeSet<ItemId>> = BTreeMap::new();
    let interactions = skeleton.interactions();
    let mut start = 0;
    while start < interactions.len() {
        let user = &interactions[start].0;
        let mut end = start;
        while end < interactions.len() && &interactions[end].0 == user {
            end += 1;
        }
        let mut items: Vec<&ItemId> = interactions[start..end].iter().map(|(_, i)| i).collect();
        let h = crate::knn::holdout_size(items.len(), holdout_frac);
        if h > 0 {
            items.shuffle(&mut rng);
            holdout.insert(
                user.clone(),
                items[..h].iter().map(|i| (*i).clone()).collect(),
            );
        }
        start = end;
    }

    Ok(FoldPlan {
        n_folds,
        assignments,
        holdout,
        seed,
    })
}

impl FoldPlan {
    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_of(&self, user: &str) -> Option<usize> {
        self.assignments.get(user).copied()
    }

    /// Users assigned to `fold`, ascending.
    pub fn fold_users(&self, fold: usize) -> Vec<&UserId> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(u, _)| u)
            .collect()
    }

    pub fn held_items(&self, user: &str) -> Option<&BTreeSet<ItemId>> {
        self.holdout.get(user)
    }

    /// Training data and per-test-user held-out ratings for one fold.
    /// Training keeps every rating except the held-out ratings of the
    /// fold's test users.
    pub fn split(
        &self,
        dataset: &RatingDataset,
        fold: usize,
    ) -> (RatingDataset, BTreeMap<UserId, BTreeMap<ItemId, u8>>) {
        let mut kept = Vec::with_capacity(dataset.len());
        let mut held: BTreeMap<UserId, BTreeMap<ItemId, u8>> = BTreeMap::new();
        for (user, item, rating) in dataset.triples() {
            let is_held = self.assignments.get(user) == Some(&fold)
                && self
                    .holdout
                    .get(user)
                    .is_some_and(|items| items.contains(item));
            if is_held {
                held.entry(user.clone())
                    .or_default()
                    .insert(item.clone(), *rating);
            } else {
                kept.push((user.clone(), item.clone(), *rating));
            }
        }
        let train = RatingDataset::from_triples(kept).expect("holdout is a strict subset");
        (train, held)
    }
}

/// Root mean squared error with scores clamped to the rating scale first.
/// `None` for an empty list.
pub fn rmse<T: Real>(pairs: &[(T, T)]) -> Option<T> {
    if pairs.is_empty() {
        return None;
    }
    let low = T::one();
    let high = T::from_count(10);
    let sum: T = pairs
        .iter()
        .map(|&(score, truth)| {
            let err = score.max(low).min(high) - truth;
            err * err
        })
        .sum();
    Some((sum / T::from_count(pairs.len())).sqrt())
}

/// NDCG with graded (rating-valued) gains: an item contributes its held-out
/// rating at its recommended position, discounted by `log2(position + 1)`.
/// The ideal ranking is the holdout sorted by rating descending, truncated
/// at `k`. `None` when the holdout is empty.
pub fn ndcg_at_k<T: Real>(
    recommended: &[ItemId],
    holdout: &BTreeMap<ItemId, u8>,
    k: usize,
) -> Option<T> {
    if holdout.is_empty() || k == 0 {
        return None;
    }
    let two = T::from_count(2);
    let discount = |pos: usize| T::from_count(pos + 2).log(two);
    let dcg: T = recommended
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, item)| match holdout.get(item) {
            Some(&rating) => T::from_count(rating as usize) / discount(pos),
            None => T::zero(),
        })
        .sum();
    let mut ideal: Vec<u8> = holdout.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: T = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &rating)| T::from_count(rating as usize) / discount(pos))
        .sum();
    if idcg <= T::zero() {
        return None;
    }
    Some(dcg / idcg)
}

/// Pearson correlation over the full training catalog between training
/// popularity count and recommendation count (zero for never-recommended
/// items). Zero variance on either side yields 0 by convention.
pub fn pop_corr<T: Real>(train_pop: &ItemPopularity, rec_counts: &BTreeMap<ItemId, usize>) -> T {
    let mut pops = Vec::with_capacity(train_pop.num_items());
    let mut recs = Vec::with_capacity(train_pop.num_items());
    for (item, &count) in train_pop.counts() {
        pops.push(T::from_count(count));
        recs.push(T::from_count(rec_counts.get(item).copied().unwrap_or(0)));
    }
    pearson(&pops, &recs).unwrap_or_else(T::zero)
}

/// Mean and per-user samples of a per-user metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSamples<T> {
    pub per_user: Vec<(UserId, T)>,
    pub mean: Option<T>,
}

fn finish_samples<T: Real>(per_user: Vec<(UserId, T)>) -> MetricSamples<T> {
    let mean = if per_user.is_empty() {
        None
    } else {
        Some(per_user.iter().map(|(_, v)| *v).sum::<T>() / T::from_count(per_user.len()))
    };
    MetricSamples { per_user, mean }
}

/// Average recommendation popularity: per user, the mean popularity
/// fraction of their recommended items; overall the mean over users.
/// Users with empty lists are excluded.
pub fn arp<T: Real>(
    rec_lists: &BTreeMap<UserId, Vec<ItemId>>,
    train_pop: &ItemPopularity,
) -> MetricSamples<T> {
    let per_user = rec_lists
        .iter()
        .filter(|(_, items)| !items.is_empty())
        .map(|(user, items)| {
            let sum: T = items
                .iter()
                .map(|i| train_pop.fraction(i).unwrap_or_else(T::zero))
                .sum();
            (user.clone(), sum / T::from_count(items.len()))
        })
        .collect();
    finish_samples(per_user)
}

/// Popularity lift in percent: per user, `100 * (q - p) / p` where `p` is
/// the mean popularity fraction of the user's training profile and `q` of
/// their recommendations. Users need at least one recommendation and one
/// profile item.
pub fn pl<T: Real>(
    rec_lists: &BTreeMap<UserId, Vec<ItemId>>,
    profiles: &BTreeMap<UserId, Vec<ItemId>>,
    train_pop: &ItemPopularity,
) -> MetricSamples<T> {
    let hundred = T::from_count(100);
    let per_user = rec_lists
        .iter()
        .filter(|(_, items)| !items.is_empty())
        .filter_map(|(user, items)| {
            let profile = profiles.get(user).filter(|p| !p.is_empty())?;
            let p: T = profile
                .iter()
                .map(|i| train_pop.fraction(i).unwrap_or_else(T::zero))
                .sum::<T>()
                / T::from_count(profile.len());
            debug_assert!(p > T::zero(), "profile items come from training data");
            let q: T = items
                .iter()
                .map(|i| train_pop.fraction(i).unwrap_or_else(T::zero))
                .sum::<T>()
                / T::from_count(items.len());
            Some((user.clone(), hundred * (q - p) / p))
        })
        .collect();
    finish_samples(per_user)
}

/// Aggregate diversity: distinct recommended items over catalog size.
pub fn agg_div<T: Real>(rec_lists: &BTreeMap<UserId, Vec<ItemId>>, catalog_size: usize) -> T {
    assert!(catalog_size > 0, "catalog must be non-empty");
    let distinct: BTreeSet<&ItemId> = rec_lists.values().flatten().collect();
    T::from_count(distinct.len()) / T::from_count(catalog_size)
}

/// One grid cell: a configuration with either a fixed `k` (from
/// `config.k`) or a tuning grid searched by RMSE before cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpec<T: Real> {
    pub config: KnnConfig<T>,
    pub k_grid: Option<Vec<usize>>,
}

impl<T: Real> ConfigSpec<T> {
    pub fn fixed(config: KnnConfig<T>) -> Self {
        Self {
            config,
            k_grid: None,
        }
    }

    pub fn tuned(config: KnnConfig<T>, grid: Vec<usize>) -> Self {
        Self {
            config,
            k_grid: Some(grid),
        }
    }
}

/// Cross-validation settings and seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions {
    pub n_folds: usize,
    pub holdout_frac: f64,
    pub top_n: usize,
    pub folds_seed: u64,
    pub tune_seed: u64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            n_folds: 5,
            holdout_frac: 0.2,
            top_n: 10,
            folds_seed: 0,
            tune_seed: 0,
        }
    }
}

/// One (scenario, configuration) result row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow<T: Real> {
    pub scenario_id: u8,
    pub config: KnnConfig<T>,
    pub pop_corr: T,
    pub arp: Option<T>,
    pub pl: Option<T>,
    pub agg_div: T,
    pub rmse: Option<T>,
    pub ndcg_at_10: Option<T>,
    /// Fraction of held-out pairs that received a prediction.
    pub coverage: T,
    /// Test users absent from the fold's training data (skipped, counted).
    pub cold_start_users: usize,
    pub arp_sig_lower: bool,
    pub pl_sig_lower: bool,
}

/// Pooled per-user samples backing the significance tests of one row.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSamples<T: Real> {
    pub scenario_id: u8,
    pub config: KnnConfig<T>,
    pub arp: Vec<(UserId, T)>,
    pub pl: Vec<(UserId, T)>,
}

/// Hyperparameter choice for one cell, with the per-k validation report
/// (k, validation RMSE, predictions) when the cell was tuned.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningChoice<T: Real> {
    pub scenario_id: u8,
    pub config_index: usize,
    pub chosen_k: usize,
    pub tuned: bool,
    pub grid_report: Vec<(usize, Option<T>, usize)>,
}

/// Everything a full grid run produces. `rows`, `samples`, and `tuning`
/// align index by index (scenario-major, configuration-minor).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport<T: Real> {
    pub rows: Vec<MetricsRow<T>>,
    pub samples: Vec<CellSamples<T>>,
    pub tuning: Vec<TuningChoice<T>>,
}

struct FoldOutcome<T: Real> {
    pop_corr: T,
    agg_div: T,
    arp_samples: Vec<(UserId, T)>,
    pl_samples: Vec<(UserId, T)>,
    ndcg_samples: Vec<T>,
    rmse_pairs: Vec<(T, T)>,
    held_total: usize,
    cold_start_users: usize,
}

/// Runs the full (scenario x configuration) grid.
pub fn run_experiment<T: Real>(
    skeleton: &InteractionSkeleton,
    scenarios: &[ScenarioSpec],
    configs: &[ConfigSpec<T>],
    options: &ExperimentOptions,
) -> Result<ExperimentReport<T>> {
    if scenarios.is_empty() || configs.is_empty() {
        return Err(Error::InvalidParameter(
            "scenario and configuration lists must be non-empty".into(),
        ));
    }
    let plan = make_folds(
        skeleton,
        options.n_folds,
        options.holdout_frac,
        options.folds_seed,
    )?;

    let mut rows = Vec::with_capacity(scenarios.len() * configs.len());
    let mut all_samples: Vec<CellSamples<T>> = Vec::with_capacity(rows.capacity());
    let mut tuning = Vec::with_capacity(rows.capacity());

    for spec in scenarios {
        let dataset = synthesize_ratings(skeleton, spec)?;
        let folds: Vec<_> = (0..options.n_folds)
            .map(|f| plan.split(&dataset, f))
            .collect();

        let scenario_row_start = rows.len();
        for (config_index, cell) in configs.iter().enumerate() {
            let (chosen_k, tuned, grid_report) = match &cell.k_grid {
                Some(grid) => {
                    let (k, report) =
                        tune_k_with_report(&dataset, cell.config, grid, options.tune_seed)?;
                    (k, true, report)
                }
                None => (cell.config.k, false, Vec::new()),
            };
            let config = cell.config.with_k(chosen_k);
            tuning.push(TuningChoice {
                scenario_id: spec.scenario.id(),
                config_index,
                chosen_k,
                tuned,
                grid_report,
            });

            let mut pop_corr_sum = T::zero();
            let mut agg_div_sum = T::zero();
            let mut arp_samples = Vec::new();
            let mut pl_samples = Vec::new();
            let mut ndcg_samples = Vec::new();
            let mut rmse_pairs = Vec::new();
            let mut held_total = 0usize;
            let mut cold = 0usize;
            for (train, held) in &folds {
                let outcome = evaluate_fold(train, held, config, options.top_n)?;
                pop_corr_sum = pop_corr_sum + outcome.pop_corr;
                agg_div_sum = agg_div_sum + outcome.agg_div;
                arp_samples.extend(outcome.arp_samples);
                pl_samples.extend(outcome.pl_samples);
                ndcg_samples.extend(outcome.ndcg_samples);
                rmse_pairs.extend(outcome.rmse_pairs);
                held_total += outcome.held_total;
                cold += outcome.cold_start_users;
            }

            let n_folds_t = T::from_count(options.n_folds);
            let arp_mean = mean_of(arp_samples.iter().map(|(_, v)| *v));
            let pl_mean = mean_of(pl_samples.iter().map(|(_, v)| *v));
            let ndcg_mean = mean_of(ndcg_samples.iter().copied());
            let coverage = if held_total > 0 {
                T::from_count(rmse_pairs.len()) / T::from_count(held_total)
            } else {
                T::zero()
            };
            rows.push(MetricsRow {
                scenario_id: spec.scenario.id(),
                config,
                pop_corr: pop_corr_sum / n_folds_t,
                arp: arp_mean,
                pl: pl_mean,
                agg_div: agg_div_sum / n_folds_t,
                rmse: rmse(&rmse_pairs),
                ndcg_at_10: ndcg_mean,
                coverage,
                cold_start_users: cold,
                arp_sig_lower: false,
                pl_sig_lower: false,
            });
            all_samples.push(CellSamples {
                scenario_id: spec.scenario.id(),
                config,
                arp: arp_samples,
                pl: pl_samples,
            });
        }

        mark_significance(
            &mut rows[scenario_row_start..],
            &all_samples[scenario_row_start..],
        );
    }

    Ok(ExperimentReport {
        rows,
        samples: all_samples,
        tuning,
    })
}

fn mean_of<T: Real, I: Iterator<Item = T>>(values: I) -> Option<T> {
    let mut sum = T::zero();
    let mut n = 0usize;
    for v in values {
        sum = sum + v;
        n += 1;
    }
    (n > 0).then(|| sum / T::from_count(n))
}

/// Marks, within one scenario, every configuration whose per-user sample is
/// significantly lower than the highest-mean configuration's (one
/// comparison per config, two-sided test at [`SIGNIFICANCE_ALPHA`]).
fn mark_significance<T: Real>(rows: &mut [MetricsRow<T>], samples: &[CellSamples<T>]) {
    fn flags_for<T: Real>(
        rows: &[MetricsRow<T>],
        samples: &[CellSamples<T>],
        metric_mean: impl Fn(&MetricsRow<T>) -> Option<T>,
        metric_samples: impl Fn(&CellSamples<T>) -> &[(UserId, T)],
    ) -> Vec<bool> {
        let mut flags = vec![false; rows.len()];
        // Highest mean wins; exact ties keep the earliest config.
        let mut max_idx: Option<(usize, T)> = None;
        for (i, row) in rows.iter().enumerate() {
            if let Some(m) = metric_mean(row) {
                let better = match max_idx {
                    None => true,
                    Some((_, best)) => m > best,
                };
                if better {
                    max_idx = Some((i, m));
                }
            }
        }
        let Some((max_idx, max_mean)) = max_idx else {
            return flags;
        };
        let max_sample: Vec<T> = metric_samples(&samples[max_idx])
            .iter()
            .map(|(_, v)| *v)
            .collect();
        if max_sample.is_empty() {
            return flags;
        }
        for (i, row) in rows.iter().enumerate() {
            if i == max_idx {
                continue;
            }
            let Some(mean) = metric_mean(row) else {
                continue;
            };
            let sample: Vec<T> = metric_samples(&samples[i])
                .iter()
                .map(|(_, v)| *v)
                .collect();
            if sample.is_empty() {
                continue;
            }
            let test = mann_whitney_u(&sample, &max_sample);
            flags[i] = test.p_two_sided < SIGNIFICANCE_ALPHA && mean < max_mean;
        }
        flags
    }

    let arp_flags = flags_for(rows, samples, |row| row.arp, |cell| &cell.arp);
    let pl_flags = flags_for(rows, samples, |row| row.pl, |cell| &cell.pl);
    for (i, row) in rows.iter_mut().enumerate() {
        row.arp_sig_lower = arp_flags[i];
        row.pl_sig_lower = pl_flags[i];
    }
}

fn evaluate_fold<T: Real>(
    train: &RatingDataset,
    held: &BTreeMap<UserId, BTreeMap<ItemId, u8>>,
    config: KnnConfig<T>,
    top_n: usize,
) -> Result<FoldOutcome<T>> {
    let model = fit(train, config)?;
    let train_pop = train.item_popularity();

    let mut cold = 0usize;
    let mut test_users: Vec<(&UserId, &BTreeMap<ItemId, u8>)> = Vec::with_capacity(held.len());
    for (user, items) in held {
        if model.contains_user(user) {
            test_users.push((user, items));
        } else {
            cold += 1;
        }
    }

    // Per-user work is independent; the ordered collect keeps results
    // identical to a sequential pass.
    let per_user: Vec<(Vec<ItemId>, Vec<(T, T)>, usize)> = test_users
        .par_iter()
        .map(|(user, held_items)| {
            let sims = model
                .similarities_for(user)
                .expect("test users are in training");
            let recs = model.recommend_with(&sims, top_n);
            let mut pairs = Vec::with_capacity(held_items.len());
            for (item, &rating) in held_items.iter() {
                if let Some((score, _)) = model.score_with(&sims, item) {
                    pairs.push((score, T::from_count(rating as usize)));
                }
            }
            (recs, pairs, held_items.len())
        })
        .collect();

    let mut rec_lists: BTreeMap<UserId, Vec<ItemId>> = BTreeMap::new();
    let mut profiles: BTreeMap<UserId, Vec<ItemId>> = BTreeMap::new();
    let mut ndcg_samples = Vec::new();
    let mut rmse_pairs = Vec::new();
    let mut held_total = 0usize;
    for ((user, held_items), (recs, pairs, held_count)) in test_users.iter().zip(per_user) {
        if let Some(n) = ndcg_at_k::<T>(&recs, held_items, top_n) {
            ndcg_samples.push(n);
        }
        rmse_pairs.extend(pairs);
        held_total += held_count;
        profiles.insert(
            (*user).clone(),
            model
                .profile(user)
                .expect("test users are in training")
                .into_iter()
                .cloned()
                .collect(),
        );
        rec_lists.insert((*user).clone(), recs);
    }

    let mut rec_counts: BTreeMap<ItemId, usize> = BTreeMap::new();
    for item in rec_lists.values().flatten() {
        *rec_counts.entry(item.clone()).or_insert(0) += 1;
    }

    let arp_result = arp(&rec_lists, &train_pop);
    let pl_result = pl(&rec_lists, &profiles, &train_pop);

    Ok(FoldOutcome {
        pop_corr: pop_corr(&train_pop, &rec_counts),
        agg_div: agg_div(&rec_lists, model.items().len()),
        arp_samples: arp_result.per_user,
        pl_samples: pl_result.per_user,
        ndcg_samples,
        rmse_pairs,
        held_total,
        cold_start_users: cold,
    })
}
