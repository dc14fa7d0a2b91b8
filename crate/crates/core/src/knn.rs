//! Configurable user-based KNN: mean-centered cosine similarity, a
//! thresholded peer group per user, rating prediction, and top-N
//! recommendation.
//!
//! The four configuration axes:
//!
//! * `min_sim` — strict similarity cutoff (`s > min_sim`) for peer-group
//!   membership;
//! * `over_common` — similarity over the full rating vectors (missing
//!   entries as zero) or restricted to the two users' co-rated items;
//! * `min_nbrs` — least number of peers that must have rated an item
//!   before it receives a prediction;
//! * `k` — peer-group size cap.
//!
//! A user's peer group is the `k` most similar users above the threshold,
//! over the whole training population. The neighbourhood for one item is
//! the peers who rated it; items outside the peer group's combined profile
//! get no prediction, which is what ties recommendation exposure to item
//! popularity when `min_nbrs` rises.
//!
//! Similarity is the cosine of mean-centered rating vectors in both item
//! scopes. Prediction weights neighbours by signed similarity and
//! normalizes by the sum of absolute similarities, so negative neighbours
//! contribute inverted evidence without flipping the normalization.
//! Predicted scores are not clamped here; clamping happens where a score
//! meets the rating scale (RMSE).

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{ItemId, RatingDataset, UserId};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// The four-axis UserKNN configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig<T: Real> {
    pub min_sim: T,
    pub over_common: bool,
    pub min_nbrs: usize,
    pub k: usize,
}

impl<T: Real> KnnConfig<T> {
    pub fn new(min_sim: T, over_common: bool, min_nbrs: usize, k: usize) -> Result<Self> {
        let config = Self {
            min_sim,
            over_common,
            min_nbrs,
            k,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let one = T::one();
        if !(self.min_sim >= -one && self.min_sim <= one) {
            return Err(Error::InvalidParameter(format!(
                "min_sim {} outside [-1, 1]",
                self.min_sim
            )));
        }
        if self.min_nbrs < 1 {
            return Err(Error::InvalidParameter(
                "min_nbrs must be at least 1".into(),
            ));
        }
        if self.k < self.min_nbrs {
            return Err(Error::InvalidParameter(format!(
                "k {} below min_nbrs {}",
                self.k, self.min_nbrs
            )));
        }
        Ok(())
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }
}

/// A rating prediction. `score` is unclamped; `neighbours_used` is the
/// number of peers that backed it (at least `min_nbrs`).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T: Real> {
    pub user: UserId,
    pub item: ItemId,
    pub score: T,
    pub neighbours_used: usize,
}

/// Immutable trained state: per-user means, centered ratings in both
/// user-major and item-major layouts, and id/index maps.
#[derive(Debug, Clone)]
pub struct FittedModel<T: Real> {
    config: KnnConfig<T>,
    users: Vec<UserId>,
    items: Vec<ItemId>,
    user_index: HashMap<UserId, usize>,
    item_index: HashMap<ItemId, usize>,
    user_means: Vec<T>,
    // User-major CSR, item indices ascending within each row.
    user_ptr: Vec<usize>,
    user_items: Vec<u32>,
    user_centered: Vec<T>,
    // Item-major CSR, user indices ascending within each column.
    item_ptr: Vec<usize>,
    item_users: Vec<u32>,
    item_centered: Vec<T>,
    // Full-vector centered norms.
    user_norms: Vec<T>,
}

/// Similarities from one user to every training user, plus the ordered
/// candidate peer list (every user above the threshold, most similar
/// first, ties broken by ascending user id). The `k` cap is applied where
/// the peers are consumed, so one buffer serves any neighbourhood size.
pub struct UserSimilarities<T> {
    user: usize,
    sims: Vec<T>,
    peers: Vec<u32>,
}

impl<T: Real> UserSimilarities<T> {
    /// Similarity to the training user at index `idx` in the model's user
    /// order. Exactly zero for users sharing no item.
    pub fn get(&self, idx: usize) -> T {
        self.sims[idx]
    }

    /// Threshold-passing users, most similar first.
    pub fn peers(&self) -> &[u32] {
        &self.peers
    }
}

/// Trains a model. The heavy state (means, centered vectors, indexes) does
/// not depend on the configuration; the configuration is carried for
/// prediction-time behaviour.
pub fn fit<T: Real>(train: &RatingDataset, config: KnnConfig<T>) -> Result<FittedModel<T>> {
    config.validate()?;
    let users = train.users().to_vec();
    let items = train.items().to_vec();
    let user_index: HashMap<UserId, usize> = users
        .iter()
        .enumerate()
        .map(|(i, u)| (u.clone(), i))
        .collect();
    let item_index: HashMap<ItemId, usize> = items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.clone(), i))
        .collect();

    let nnz = train.len();
    let mut user_ptr = vec![0usize; users.len() + 1];
    let mut item_counts = vec![0usize; items.len()];
    for (user, item, _) in train.triples() {
        user_ptr[user_index[user] + 1] += 1;
        item_counts[item_index[item]] += 1;
    }
    for i in 0..users.len() {
        user_ptr[i + 1] += user_ptr[i];
    }

    // Triples are sorted by (user, item), so rows fill in item order.
    let mut user_items = vec![0u32; nnz];
    let mut user_ratings = vec![T::zero(); nnz];
    let mut cursor = 0usize;
    let mut user_means = vec![T::zero(); users.len()];
    for (u_idx, user) in users.iter().enumerate() {
        let start = cursor;
        let mut sum = T::zero();
        while cursor < nnz && &train.triples()[cursor].0 == user {
            let (_, item, rating) = &train.triples()[cursor];
            user_items[cursor] = item_index[item] as u32;
            let r = T::from_count(*rating as usize);
            user_ratings[cursor] = r;
            sum = sum + r;
            cursor += 1;
        }
        debug_assert!(cursor > start, "every training user has a rating");
        user_means[u_idx] = sum / T::from_count(cursor - start);
    }
    debug_assert_eq!(cursor, nnz);

    let mut user_centered = vec![T::zero(); nnz];
    let mut user_norms = vec![T::zero(); users.len()];
    for u_idx in 0..users.len() {
        let mut sq = T::zero();
        for pos in user_ptr[u_idx]..user_ptr[u_idx + 1] {
            let c = user_ratings[pos] - user_means[u_idx];
            user_centered[pos] = c;
            sq = sq + c * c;
        }
        user_norms[u_idx] = sq.sqrt();
    }

    let mut item_ptr = vec![0usize; items.len() + 1];
    for (i, &count) in item_counts.iter().enumerate() {
        item_ptr[i + 1] = item_ptr[i] + count;
    }
    let mut fill = item_ptr.clone();
    let mut item_users = vec![0u32; nnz];
    let mut item_centered = vec![T::zero(); nnz];
    for u_idx in 0..users.len() {
        for pos in user_ptr[u_idx]..user_ptr[u_idx + 1] {
            let i_idx = user_items[pos] as usize;
            item_users[fill[i_idx]] = u_idx as u32;
            item_centered[fill[i_idx]] = user_centered[pos];
            fill[i_idx] += 1;
        }
    }

    Ok(FittedModel {
        config,
        users,
        items,
        user_index,
        item_index,
        user_means,
        user_ptr,
        user_items,
        user_centered,
        item_ptr,
        item_users,
        item_centered,
        user_norms,
    })
}

impl<T: Real> FittedModel<T> {
    pub fn config(&self) -> &KnnConfig<T> {
        &self.config
    }

    /// Training users, ascending.
    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    /// Training catalog, ascending.
    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn contains_user(&self, user: &str) -> bool {
        self.user_index.contains_key(user)
    }

    pub fn contains_item(&self, item: &str) -> bool {
        self.item_index.contains_key(item)
    }

    pub fn user_mean(&self, user: &str) -> Option<T> {
        self.user_index.get(user).map(|&u| self.user_means[u])
    }

    /// Items rated by `user` in training, ascending.
    pub fn profile(&self, user: &str) -> Option<Vec<&ItemId>> {
        let &u = self.user_index.get(user)?;
        Some(
            self.user_items[self.user_ptr[u]..self.user_ptr[u + 1]]
                .iter()
                .map(|&i| &self.items[i as usize])
                .collect(),
        )
    }

    fn require_user(&self, user: &str) -> Result<usize> {
        self.user_index
            .get(user)
            .copied()
            .ok_or_else(|| Error::UnknownUser(user.to_string()))
    }

    fn user_row(&self, u: usize) -> (&[u32], &[T]) {
        let range = self.user_ptr[u]..self.user_ptr[u + 1];
        (&self.user_items[range.clone()], &self.user_centered[range])
    }

    /// Centered rating of user `u` on `item`, if rated.
    fn centered_rating(&self, u: usize, item: u32) -> Option<T> {
        let (items, centered) = self.user_row(u);
        items.binary_search(&item).ok().map(|pos| centered[pos])
    }

    fn item_col(&self, i: usize) -> (&[u32], &[T]) {
        let range = self.item_ptr[i]..self.item_ptr[i + 1];
        (&self.item_users[range.clone()], &self.item_centered[range])
    }

    /// Cosine of the mean-centered rating vectors of two distinct training
    /// users under the configured item scope. Zero when either vector (or
    /// the co-rated restriction) has zero norm, including disjoint profiles.
    pub fn similarity(&self, u: &str, v: &str) -> Result<T> {
        let u_idx = self.require_user(u)?;
        let v_idx = self.require_user(v)?;
        if u_idx == v_idx {
            return Err(Error::InvalidParameter(format!(
                "similarity of user `{u}` with itself is undefined"
            )));
        }
        Ok(self.pair_similarity(u_idx, v_idx))
    }

    fn pair_similarity(&self, u: usize, v: usize) -> T {
        let (u_items, u_centered) = self.user_row(u);
        let (v_items, v_centered) = self.user_row(v);
        let mut dot = T::zero();
        let mut sq_u = T::zero();
        let mut sq_v = T::zero();
        let (mut a, mut b) = (0usize, 0usize);
        while a < u_items.len() && b < v_items.len() {
            match u_items[a].cmp(&v_items[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    let cu = u_centered[a];
                    let cv = v_centered[b];
                    dot = dot + cu * cv;
                    sq_u = sq_u + cu * cu;
                    sq_v = sq_v + cv * cv;
                    a += 1;
                    b += 1;
                }
            }
        }
        self.finish_similarity(u, v, dot, sq_u, sq_v)
    }

    fn finish_similarity(&self, u: usize, v: usize, dot: T, sq_u: T, sq_v: T) -> T {
        if self.config.over_common {
            if sq_u > T::zero() && sq_v > T::zero() {
                dot / (sq_u.sqrt() * sq_v.sqrt())
            } else {
                T::zero()
            }
        } else {
            let nu = self.user_norms[u];
            let nv = self.user_norms[v];
            if nu > T::zero() && nv > T::zero() {
                dot / (nu * nv)
            } else {
                T::zero()
            }
        }
    }

    /// Similarities from `user` to every training user, plus the ordered
    /// peer candidates. Pairwise values equal [`FittedModel::similarity`]
    /// bit for bit.
    pub fn similarities_for(&self, user: &str) -> Result<UserSimilarities<T>> {
        let u = self.require_user(user)?;
        Ok(self.similarities_indexed(u))
    }

    fn similarities_indexed(&self, u: usize) -> UserSimilarities<T> {
        let n = self.users.len();
        let mut dot = vec![T::zero(); n];
        let mut sq_u = vec![T::zero(); n];
        let mut sq_v = vec![T::zero(); n];
        let mut touched: Vec<u32> = Vec::new();
        let (u_items, u_centered) = self.user_row(u);
        // Iterating the profile in ascending item order keeps per-pair
        // accumulation order identical to the pairwise merge join, so the
        // two routes agree bit for bit.
        for (&item, &cu) in u_items.iter().zip(u_centered) {
            let (raters, centered) = self.item_col(item as usize);
            for (&v, &cv) in raters.iter().zip(centered) {
                let v = v as usize;
                if v == u {
                    continue;
                }
                if dot[v] == T::zero() && sq_u[v] == T::zero() && sq_v[v] == T::zero() {
                    touched.push(v as u32);
                }
                dot[v] = dot[v] + cu * cv;
                sq_u[v] = sq_u[v] + cu * cu;
                sq_v[v] = sq_v[v] + cv * cv;
            }
        }
        let mut sims = vec![T::zero(); n];
        for &v in &touched {
            let v = v as usize;
            sims[v] = self.finish_similarity(u, v, dot[v], sq_u[v], sq_v[v]);
        }

        // Peer candidates: every other user above the threshold (at
        // min_sim = -1 this includes zero-similarity users), most similar
        // first, ascending user id on ties.
        let mut peers: Vec<u32> = (0..n as u32)
            .filter(|&v| v as usize != u && sims[v as usize] > self.config.min_sim)
            .collect();
        peers.sort_by(|&a, &b| {
            sims[b as usize]
                .partial_cmp(&sims[a as usize])
                .expect("similarities are finite")
                .then_with(|| a.cmp(&b))
        });
        UserSimilarities {
            user: u,
            sims,
            peers,
        }
    }

    /// The neighbourhood used to predict `item` for `user`: members of the
    /// user's peer group (the `k` most similar threshold-passing users)
    /// who rated the item, most similar first.
    ///
    /// An item absent from the training catalog has no raters and yields an
    /// empty list.
    pub fn neighbourhood(&self, user: &str, item: &str) -> Result<Vec<(UserId, T)>> {
        let sims = self.similarities_for(user)?;
        let item_idx = match self.item_index.get(item) {
            Some(&i) => i as u32,
            None => return Ok(Vec::new()),
        };
        Ok(self
            .neighbourhood_indexed(&sims, item_idx, self.config.k)
            .into_iter()
            .map(|(v, s, _)| (self.users[v].clone(), s))
            .collect())
    }

    /// (user index, similarity, centered rating) of the peers backing the
    /// item, in peer order.
    fn neighbourhood_indexed(
        &self,
        sims: &UserSimilarities<T>,
        item: u32,
        k: usize,
    ) -> Vec<(usize, T, T)> {
        let mut kept = Vec::new();
        for &v in sims.peers.iter().take(k) {
            if let Some(centered) = self.centered_rating(v as usize, item) {
                kept.push((v as usize, sims.sims[v as usize], centered));
            }
        }
        kept
    }

    /// Predicts the rating of `item` for `user`, or `None` when fewer than
    /// `min_nbrs` peers rated it or the similarity mass is zero.
    pub fn predict(&self, user: &str, item: &str) -> Result<Option<Prediction<T>>> {
        let sims = self.similarities_for(user)?;
        let item_idx = self
            .item_index
            .get(item)
            .copied()
            .ok_or_else(|| Error::UnknownItem(item.to_string()))?;
        Ok(self
            .score_indexed(&sims, item_idx as u32, self.config.k)
            .map(|(score, neighbours_used)| Prediction {
                user: user.to_string(),
                item: item.to_string(),
                score,
                neighbours_used,
            }))
    }

    /// Scores `item` for the user behind `sims` with an explicit peer cap.
    /// Returns `(score, neighbours_used)`.
    fn score_indexed(&self, sims: &UserSimilarities<T>, item: u32, k: usize) -> Option<(T, usize)> {
        let mut numerator = T::zero();
        let mut denominator = T::zero();
        let mut used = 0usize;
        for &v in sims.peers.iter().take(k) {
            if let Some(centered) = self.centered_rating(v as usize, item) {
                let s = sims.sims[v as usize];
                numerator = numerator + s * centered;
                denominator = denominator + s.abs();
                used += 1;
            }
        }
        if used < self.config.min_nbrs || denominator == T::zero() {
            return None;
        }
        Some((self.user_means[sims.user] + numerator / denominator, used))
    }

    /// Scores one item for a user whose similarities were prepared with
    /// [`FittedModel::similarities_for`]. `None` for items outside the
    /// training catalog or without a prediction.
    pub fn score_with(&self, sims: &UserSimilarities<T>, item: &str) -> Option<(T, usize)> {
        let item_idx = self.item_index.get(item).copied()?;
        self.score_indexed(sims, item_idx as u32, self.config.k)
    }

    /// Top-`n` recommendation: scores every catalog item the user has not
    /// rated in training, drops no-predictions, sorts by score descending
    /// (ascending item id on ties).
    pub fn recommend_top_n(&self, user: &str, n: usize) -> Result<Vec<ItemId>> {
        let u = self.require_user(user)?;
        let sims = self.similarities_indexed(u);
        Ok(self.recommend_with(&sims, n))
    }

    /// [`FittedModel::recommend_top_n`] against precomputed similarities.
    ///
    /// Accumulates evidence by walking the peers' profiles, which visits
    /// each item's contributions in the same peer order as
    /// [`FittedModel::score_with`], so the two routes agree bit for bit.
    pub fn recommend_with(&self, sims: &UserSimilarities<T>, n: usize) -> Vec<ItemId> {
        let mut numerator = vec![T::zero(); self.items.len()];
        let mut denominator = vec![T::zero(); self.items.len()];
        let mut used = vec![0u32; self.items.len()];
        for &v in sims.peers.iter().take(self.config.k) {
            let s = sims.sims[v as usize];
            let (items, centered) = self.user_row(v as usize);
            for (&item, &c) in items.iter().zip(centered) {
                let item = item as usize;
                numerator[item] = numerator[item] + s * c;
                denominator[item] = denominator[item] + s.abs();
                used[item] += 1;
            }
        }
        let (rated, _) = self.user_row(sims.user);
        let mean = self.user_means[sims.user];
        let mut scored: Vec<(usize, T)> = Vec::new();
        for item in 0..self.items.len() {
            if (used[item] as usize) < self.config.min_nbrs
                || denominator[item] == T::zero()
                || rated.binary_search(&(item as u32)).is_ok()
            {
                continue;
            }
            scored.push((item, mean + numerator[item] / denominator[item]));
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then_with(|| a.0.cmp(&b.0))
        });
        scored.truncate(n);
        scored
            .into_iter()
            .map(|(i, _)| self.items[i].clone())
            .collect()
    }
}

/// Per-user 80/20 validation split used by [`tune_k`]: for each user with
/// at least two ratings, a seeded shuffle holds out `round(0.2 * n)`
/// ratings (at least one, never all); single-rating users stay train-only.
pub fn inner_validation_split(
    train: &RatingDataset,
    seed: u64,
) -> (RatingDataset, Vec<(UserId, ItemId, u8)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::with_capacity(train.len());
    let mut held = Vec::new();
    // Triples are sorted by (user, item); walk user blocks in order so the
    // stream is consumed canonically.
    let triples = train.triples();
    let mut start = 0;
    while start < triples.len() {
        let user = &triples[start].0;
        let mut end = start;
        while end < triples.len() && &triples[end].0 == user {
            end += 1;
        }
        let block: Vec<usize> = (start..end).collect();
        let n = block.len();
        let h = holdout_size(n, 0.2);
        if h == 0 {
            kept.extend(block.iter().map(|&i| triples[i].clone()));
        } else {
            let mut order = block;
            order.shuffle(&mut rng);
            let (held_idx, kept_idx) = order.split_at(h);
            let mut held_rows: Vec<_> = held_idx.iter().map(|&i| triples[i].clone()).collect();
            held_rows.sort();
            held.extend(held_rows);
            kept.extend(kept_idx.iter().map(|&i| triples[i].clone()));
        }
        start = end;
    }
    let train = RatingDataset::from_triples(kept).expect("split keeps at least one rating");
    (train, held)
}

/// Held-out ratings per profile size: nearest integer to `frac * n`,
/// at least 1 for profiles of two or more, never the whole profile.
pub(crate) fn holdout_size(n: usize, frac: f64) -> usize {
    if n < 2 {
        return 0;
    }
    let h = (frac * n as f64).round() as usize;
    h.clamp(1, n - 1)
}

/// Picks the grid value of `k` minimizing validation RMSE on a seeded
/// 80/20 per-user inner split (ties break to the smallest `k`).
///
/// Scores are clamped to the rating scale before the squared error, and a
/// grid value whose configuration predicts nothing counts as infinitely
/// bad. Fitting happens once: the trained state does not depend on `k`,
/// and a smaller peer cap is a prefix of a larger one.
pub fn tune_k<T: Real>(
    train: &RatingDataset,
    config: KnnConfig<T>,
    grid: &[usize],
    seed: u64,
) -> Result<usize> {
    let (best, _) = tune_k_with_report(train, config, grid, seed)?;
    Ok(best)
}

/// Like [`tune_k`] but also returns `(k, rmse, predictions)` per grid value.
pub fn tune_k_with_report<T: Real>(
    train: &RatingDataset,
    config: KnnConfig<T>,
    grid: &[usize],
    seed: u64,
) -> Result<(usize, Vec<(usize, Option<T>, usize)>)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty tuning grid".into()));
    }
    let mut grid: Vec<usize> = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if let Some(&bad) = grid.iter().find(|&&k| k < config.min_nbrs) {
        return Err(Error::InvalidParameter(format!(
            "grid value {bad} below min_nbrs {}",
            config.min_nbrs
        )));
    }

    let (inner_train, held) = inner_validation_split(train, seed);
    let max_k = *grid.last().expect("non-empty grid");
    let model = fit(&inner_train, config.with_k(max_k))?;

    let low = T::one();
    let high = T::from_count(10);
    let mut sq_err = vec![T::zero(); grid.len()];
    let mut counts = vec![0usize; grid.len()];
    let mut current_user: Option<&UserId> = None;
    let mut sims: Option<UserSimilarities<T>> = None;
    for (user, item, rating) in &held {
        if current_user != Some(user) {
            current_user = Some(user);
            sims = model
                .user_index
                .get(user)
                .map(|&u| model.similarities_indexed(u));
        }
        let Some(sims) = &sims else { continue };
        let Some(&item_idx) = model.item_index.get(item) else {
            continue;
        };
        for (gi, &k) in grid.iter().enumerate() {
            if let Some((score, _)) = model.score_indexed(sims, item_idx as u32, k) {
                let clamped = score.max(low).min(high);
                let err = clamped - T::from_count(*rating as usize);
                sq_err[gi] = sq_err[gi] + err * err;
                counts[gi] += 1;
            }
        }
    }

    let mut report = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, T)> = None;
    for (gi, &k) in grid.iter().enumerate() {
        let rmse = if counts[gi] > 0 {
            Some((sq_err[gi] / T::from_count(counts[gi])).sqrt())
        } else {
            None
        };
        report.push((k, rmse, counts[gi]));
        if let Some(r) = rmse {
            let better = match best {
                None => true,
                Some((_, best_r)) => r < best_r,
            };
            if better {
                best = Some((k, r));
            }
        }
    }
    // All grid values predicting nothing: fall back to the smallest k.
    let chosen = best.map(|(k, _)| k).unwrap_or(grid[0]);
    Ok((chosen, report))
}
