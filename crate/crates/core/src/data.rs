//! Dataset representation, ingestion, popularity/profile statistics, and
//! long-tail skeleton generation.
//!
//! File format for both interaction and rating files: UTF-8, comma
//! separated, one header line (`user,item` or `user,item,rating`), no
//! quoting, LF line endings. Identifiers therefore must not contain commas
//! or line breaks; constructors reject offending ids.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stats::pearson;

pub type UserId = String;
pub type ItemId = String;

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(',') || id.contains('\n') || id.contains('\r') {
        return Err(Error::InvalidIdentifier(id.to_string()));
    }
    Ok(())
}

/// The (user, item) consumption structure without rating values.
///
/// Interactions are stored sorted by (user, item); that ordering is the
/// canonical draw order every seeded generator in the crate follows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionSkeleton {
    interactions: Vec<(UserId, ItemId)>,
    users: Vec<UserId>,
    items: Vec<ItemId>,
}

impl InteractionSkeleton {
    /// Builds a skeleton from raw pairs. Rejects empty input and duplicate
    /// pairs.
    pub fn from_pairs(mut pairs: Vec<(UserId, ItemId)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (user, item) in &pairs {
            check_id(user)?;
            check_id(item)?;
        }
        pairs.sort();
        for window in pairs.windows(2) {
            if window[0] == window[1] {
                return Err(Error::DuplicatePair {
                    user: window[0].0.clone(),
                    item: window[0].1.clone(),
                });
            }
        }
        let users = sorted_unique(pairs.iter().map(|(u, _)| u));
        let items = sorted_unique(pairs.iter().map(|(_, i)| i));
        Ok(Self {
            interactions: pairs,
            users,
            items,
        })
    }

    /// Interactions sorted by (user, item).
    pub fn interactions(&self) -> &[(UserId, ItemId)] {
        &self.interactions
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty input
    }

    /// Distinct users, ascending.
    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    /// Distinct items, ascending.
    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    /// Number of distinct users that interacted with each item.
    pub fn item_popularity(&self) -> ItemPopularity {
        item_popularity_of(
            self.interactions.iter().map(|(u, i)| (u, i)),
            self.num_users(),
        )
    }

    /// Per-user profile sizes.
    pub fn profile_stats(&self) -> ProfileStats {
        profile_stats_of(self.interactions.iter().map(|(u, _)| u))
    }
}

/// (user, item, rating) triples on the 1..=10 integer scale, sorted by
/// (user, item).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingDataset {
    triples: Vec<(UserId, ItemId, u8)>,
    users: Vec<UserId>,
    items: Vec<ItemId>,
}

impl RatingDataset {
    /// Builds a dataset from raw triples. Rejects empty input, duplicate
    /// (user, item) pairs, and ratings outside 1..=10.
    pub fn from_triples(mut triples: Vec<(UserId, ItemId, u8)>) -> Result<Self> {
        if triples.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (user, item, rating) in &triples {
            check_id(user)?;
            check_id(item)?;
            if !(1..=10).contains(rating) {
                return Err(Error::InvalidParameter(format!(
                    "rating {rating} for user `{user}`, item `{item}` outside 1..=10"
                )));
            }
        }
        triples.sort();
        for window in triples.windows(2) {
            if window[0].0 == window[1].0 && window[0].1 == window[1].1 {
                return Err(Error::DuplicatePair {
                    user: window[0].0.clone(),
                    item: window[0].1.clone(),
                });
            }
        }
        let users = sorted_unique(triples.iter().map(|(u, _, _)| u));
        let items = sorted_unique(triples.iter().map(|(_, i, _)| i));
        Ok(Self {
            triples,
            users,
            items,
        })
    }

    pub fn triples(&self) -> &[(UserId, ItemId, u8)] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty input
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    /// The (user, item) projection.
    pub fn skeleton(&self) -> InteractionSkeleton {
        let pairs = self
            .triples
            .iter()
            .map(|(u, i, _)| (u.clone(), i.clone()))
            .collect();
        InteractionSkeleton::from_pairs(pairs).expect("projection of a valid dataset")
    }

    pub fn item_popularity(&self) -> ItemPopularity {
        item_popularity_of(
            self.triples.iter().map(|(u, i, _)| (u, i)),
            self.num_users(),
        )
    }

    pub fn profile_stats(&self) -> ProfileStats {
        profile_stats_of(self.triples.iter().map(|(u, _, _)| u))
    }
}

fn sorted_unique<'a, I: Iterator<Item = &'a String>>(iter: I) -> Vec<String> {
    let mut v: Vec<String> = iter.cloned().collect();
    v.sort();
    v.dedup();
    v
}

fn item_popularity_of<'a, I>(pairs: I, num_users: usize) -> ItemPopularity
where
    I: Iterator<Item = (&'a UserId, &'a ItemId)>,
{
    let mut counts: BTreeMap<ItemId, usize> = BTreeMap::new();
    for (_, item) in pairs {
        *counts.entry(item.clone()).or_insert(0) += 1;
    }
    ItemPopularity { counts, num_users }
}

fn profile_stats_of<'a, I: Iterator<Item = &'a UserId>>(users: I) -> ProfileStats {
    let mut sizes: BTreeMap<UserId, usize> = BTreeMap::new();
    for user in users {
        *sizes.entry(user.clone()).or_insert(0) += 1;
    }
    ProfileStats { sizes }
}

/// Per-item interaction counts together with the user-base size, so
/// popularity can also be read as the fraction of users who rated the item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemPopularity {
    counts: BTreeMap<ItemId, usize>,
    num_users: usize,
}

impl ItemPopularity {
    pub fn from_counts(counts: BTreeMap<ItemId, usize>, num_users: usize) -> Self {
        Self { counts, num_users }
    }

    pub fn counts(&self) -> &BTreeMap<ItemId, usize> {
        &self.counts
    }

    pub fn count(&self, item: &str) -> Option<usize> {
        self.counts.get(item).copied()
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.counts.len()
    }

    /// count / |U|, in (0, 1].
    pub fn fraction<T: Real>(&self, item: &str) -> Option<T> {
        self.count(item)
            .map(|c| T::from_count(c) / T::from_count(self.num_users))
    }

    pub fn total_interactions(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Per-user profile sizes (number of rated items).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileStats {
    sizes: BTreeMap<UserId, usize>,
}

impl ProfileStats {
    pub fn from_sizes(sizes: BTreeMap<UserId, usize>) -> Self {
        Self { sizes }
    }

    pub fn sizes(&self) -> &BTreeMap<UserId, usize> {
        &self.sizes
    }

    pub fn size(&self, user: &str) -> Option<usize> {
        self.sizes.get(user).copied()
    }

    pub fn num_users(&self) -> usize {
        self.sizes.len()
    }
}

/// Linear min-max mapping of popularity counts onto [1, 10]:
/// `n(i) = 1 + 9 (c - c_min) / (c_max - c_min)`, reflected as `11 - n(i)`
/// when `invert` is set. When all counts are equal every item maps to 1
/// (10 when inverted).
pub fn normalize_popularity<T: Real>(pop: &ItemPopularity, invert: bool) -> BTreeMap<ItemId, T> {
    let c_min = pop.counts.values().copied().min().unwrap_or(0);
    let c_max = pop.counts.values().copied().max().unwrap_or(0);
    let one = T::one();
    let nine = T::from_count(9);
    let eleven = T::from_count(11);
    pop.counts
        .iter()
        .map(|(item, &c)| {
            let n = if c_max == c_min {
                one
            } else {
                one + nine * T::from_count(c - c_min) / T::from_count(c_max - c_min)
            };
            (item.clone(), if invert { eleven - n } else { n })
        })
        .collect()
}

/// The `ceil(fraction * |U|)` users with the largest profiles. Ties at the
/// cutoff break by ascending user id, so the result is deterministic.
pub fn top_profile_users(stats: &ProfileStats, fraction: f64) -> Result<BTreeSet<UserId>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "profile fraction {fraction} outside (0, 1]"
        )));
    }
    let n = stats.sizes.len();
    // Guard against float excess in e.g. 0.2 * 10 = 2.0000000000000004.
    let take = ((fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let take = take.min(n);
    let mut ranked: Vec<(&UserId, usize)> = stats.sizes.iter().map(|(u, &s)| (u, s)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(ranked
        .into_iter()
        .take(take)
        .map(|(u, _)| u.clone())
        .collect())
}

/// Pearson correlation across items between average rating (within the
/// optional user subset) and popularity count over the full dataset.
///
/// Items with no rating inside the restriction are excluded. `None` when
/// fewer than two items remain or either side has zero variance.
pub fn rating_popularity_correlation<T: Real>(
    dataset: &RatingDataset,
    subset: Option<&BTreeSet<UserId>>,
) -> Option<T> {
    let pop = dataset.item_popularity();
    let mut sums: BTreeMap<&ItemId, (T, usize)> = BTreeMap::new();
    for (user, item, rating) in dataset.triples() {
        if let Some(allowed) = subset {
            if !allowed.contains(user) {
                continue;
            }
        }
        let entry = sums.entry(item).or_insert((T::zero(), 0));
        entry.0 = entry.0 + T::from_count(*rating as usize);
        entry.1 += 1;
    }
    let mut avg = Vec::with_capacity(sums.len());
    let mut count = Vec::with_capacity(sums.len());
    for (item, (sum, n)) in sums {
        avg.push(sum / T::from_count(n));
        count.push(T::from_count(pop.count(item).expect("item in dataset")));
    }
    pearson(&avg, &count)
}

/// Parameters for [`generate_longtail_skeleton`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LongtailParams {
    pub num_users: usize,
    pub num_items: usize,
    pub num_interactions: usize,
    pub exponent: f64,
    pub seed: u64,
}

/// Generates an interaction skeleton whose user and item frequencies both
/// follow a rank^(-exponent) power law.
///
/// Every user and item is seeded with one interaction first (a shuffled
/// cyclic pairing), then the remaining interactions are rejection-sampled
/// from the two power laws to avoid duplicate pairs. All randomness comes
/// from one ChaCha8 stream seeded with `params.seed`, so output is
/// deterministic across runs and platforms.
pub fn generate_longtail_skeleton(params: &LongtailParams) -> Result<InteractionSkeleton> {
    let LongtailParams {
        num_users,
        num_items,
        num_interactions,
        exponent,
        seed,
    } = *params;
    if num_users == 0 || num_items == 0 {
        return Err(Error::InvalidParameter(
            "num_users and num_items must be positive".into(),
        ));
    }
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "exponent {exponent} must be positive and finite"
        )));
    }
    let max_dim = num_users.max(num_items);
    if num_interactions < max_dim {
        return Err(Error::InfeasibleParameters(format!(
            "{num_interactions} interactions cannot cover {num_users} users and {num_items} items"
        )));
    }
    if num_interactions as u128 > num_users as u128 * num_items as u128 {
        return Err(Error::InfeasibleParameters(format!(
            "{num_interactions} interactions exceed {num_users} x {num_items} possible pairs"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Coverage pass: pair a shuffled user order with a shuffled item order
    // cyclically so every user and item appears at least once. Pairs cannot
    // repeat within the pass because the longer side never cycles.
    let mut user_order: Vec<u32> = (0..num_users as u32).collect();
    let mut item_order: Vec<u32> = (0..num_items as u32).collect();
    user_order.shuffle(&mut rng);
    item_order.shuffle(&mut rng);

    let mut seen: HashSet<(u32, u32)> = HashSet::with_capacity(num_interactions * 2);
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(num_interactions);
    for j in 0..max_dim {
        let pair = (user_order[j % num_users], item_order[j % num_items]);
        seen.insert(pair);
        pairs.push(pair);
    }

    // Fill pass: rank 1 is the heaviest user/item (lowest index, so ids
    // sort by popularity).
    let user_cdf = power_law_cdf(num_users, exponent);
    let item_cdf = power_law_cdf(num_items, exponent);
    let mut attempts: u64 = 0;
    let attempt_limit = 1_000 * num_interactions as u64 + 10_000;
    while pairs.len() < num_interactions {
        attempts += 1;
        if attempts > attempt_limit {
            return Err(Error::InfeasibleParameters(
                "rejection sampling stalled; parameters leave too few free pairs".into(),
            ));
        }
        let user = sample_cdf(&user_cdf, &mut rng);
        let item = sample_cdf(&item_cdf, &mut rng);
        if seen.insert((user, item)) {
            pairs.push((user, item));
        }
    }

    let user_width = digits(num_users);
    let item_width = digits(num_items);
    let named = pairs
        .into_iter()
        .map(|(u, i)| {
            (
                format!("u{:0width$}", u + 1, width = user_width),
                format!("i{:0width$}", i + 1, width = item_width),
            )
        })
        .collect();
    InteractionSkeleton::from_pairs(named)
}

fn digits(n: usize) -> usize {
    n.to_string().len()
}

fn power_law_cdf(n: usize, exponent: f64) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(n);
    let mut total = 0.0;
    for rank in 1..=n {
        total += (rank as f64).powf(-exponent);
        cdf.push(total);
    }
    cdf
}

fn sample_cdf(cdf: &[f64], rng: &mut ChaCha8Rng) -> u32 {
    let total = *cdf.last().expect("non-empty cdf");
    let x: f64 = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= x).min(cdf.len() - 1) as u32
}

/// Reads an interaction file (`user,item` header; a third rating column is
/// accepted and ignored).
pub fn load_interactions<P: AsRef<Path>>(path: P) -> Result<InteractionSkeleton> {
    let rows = read_rows(path.as_ref())?;
    let pairs = rows.into_iter().map(|(u, i, _)| (u, i)).collect();
    InteractionSkeleton::from_pairs(pairs)
}

/// Reads a rating file (`user,item,rating` header; integer ratings 1..=10).
pub fn load_ratings<P: AsRef<Path>>(path: P) -> Result<RatingDataset> {
    let file = File::open(path.as_ref())?;
    let mut triples = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let number = idx + 1;
        if idx == 0 {
            if line != "user,item,rating" {
                return Err(Error::MalformedLine {
                    line: number,
                    content: line,
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::MalformedLine {
                line: number,
                content: line,
            });
        }
        let rating: u8 = fields[2].parse().map_err(|_| Error::RatingOutOfRange {
            line: number,
            value: fields[2].to_string(),
        })?;
        if !(1..=10).contains(&rating) {
            return Err(Error::RatingOutOfRange {
                line: number,
                value: fields[2].to_string(),
            });
        }
        triples.push((fields[0].to_string(), fields[1].to_string(), rating));
    }
    RatingDataset::from_triples(triples)
}

fn read_rows(path: &Path) -> Result<Vec<(String, String, Option<String>)>> {
    let file = File::open(path)?;
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let number = idx + 1;
        if idx == 0 {
            if line != "user,item" && line != "user,item,rating" {
                return Err(Error::MalformedLine {
                    line: number,
                    content: line,
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if !(fields.len() == 2 || fields.len() == 3) || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::MalformedLine {
                line: number,
                content: line,
            });
        }
        rows.push((
            fields[0].to_string(),
            fields[1].to_string(),
            fields.get(2).map(|s| s.to_string()),
        ));
    }
    Ok(rows)
}

/// Writes a skeleton as `user,item` CSV (LF endings, no quoting).
pub fn write_skeleton<P: AsRef<Path>>(skeleton: &InteractionSkeleton, path: P) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    out.write_all(b"user,item\n")?;
    for (user, item) in skeleton.interactions() {
        writeln!(out, "{user},{item}")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a dataset as `user,item,rating` CSV (LF endings, no quoting).
pub fn write_ratings<P: AsRef<Path>>(dataset: &RatingDataset, path: P) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    out.write_all(b"user,item,rating\n")?;
    for (user, item, rating) in dataset.triples() {
        writeln!(out, "{user},{item},{rating}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(u: &str, i: &str) -> (UserId, ItemId) {
        (u.to_string(), i.to_string())
    }

    #[test]
    fn skeleton_counts_users_and_items() {
        let s = InteractionSkeleton::from_pairs(vec![
            pair("u1", "i1"),
            pair("u2", "i1"),
            pair("u1", "i2"),
        ])
        .unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.num_users(), 2);
        assert_eq!(s.num_items(), 2);
    }

    #[test]
    fn duplicate_pair_is_rejected() {
        let err =
            InteractionSkeleton::from_pairs(vec![pair("u1", "i1"), pair("u1", "i1")]).unwrap_err();
        match err {
            Error::DuplicatePair { user, item } => {
                assert_eq!(user, "u1");
                assert_eq!(item, "i1");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(
            InteractionSkeleton::from_pairs(vec![]),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn popularity_counts_and_fractions() {
        let s = InteractionSkeleton::from_pairs(vec![
            pair("u1", "i1"),
            pair("u2", "i1"),
            pair("u1", "i2"),
        ])
        .unwrap();
        let pop = s.item_popularity();
        assert_eq!(pop.count("i1"), Some(2));
        assert_eq!(pop.count("i2"), Some(1));
        assert_eq!(pop.fraction::<f64>("i1"), Some(1.0));
        assert_eq!(pop.fraction::<f64>("i2"), Some(0.5));
        assert_eq!(pop.total_interactions(), s.len());
    }

    #[test]
    fn normalization_is_linear_min_max() {
        // counts: a=1, b=5, c=9
        let mut pairs = vec![pair("u1", "a")];
        for n in 1..=5 {
            pairs.push(pair(&format!("u{n}"), "b"));
        }
        for n in 1..=9 {
            pairs.push(pair(&format!("u{n}"), "c"));
        }
        let s = InteractionSkeleton::from_pairs(pairs).unwrap();
        let n = normalize_popularity::<f64>(&s.item_popularity(), false);
        assert_eq!(n["a"], 1.0);
        assert_eq!(n["b"], 5.5);
        assert_eq!(n["c"], 10.0);
        let inv = normalize_popularity::<f64>(&s.item_popularity(), true);
        assert_eq!(inv["a"], 10.0);
        assert_eq!(inv["b"], 5.5);
        assert_eq!(inv["c"], 1.0);
    }

    #[test]
    fn normalization_degenerate_counts_map_to_scale_ends() {
        let s = InteractionSkeleton::from_pairs(vec![pair("u1", "a"), pair("u1", "b")]).unwrap();
        let n = normalize_popularity::<f64>(&s.item_popularity(), false);
        assert!(n.values().all(|&v| v == 1.0));
        let inv = normalize_popularity::<f64>(&s.item_popularity(), true);
        assert!(inv.values().all(|&v| v == 10.0));
    }

    #[test]
    fn top_profile_users_takes_ceil_with_tie_break() {
        // 10 users; sizes 10, 9, 9, then 1..=7. The two rank-2 users tie;
        // fraction 0.2 takes exactly two, preferring the smaller id.
        let mut sizes = BTreeMap::new();
        sizes.insert("u01".to_string(), 10);
        sizes.insert("u02".to_string(), 9);
        sizes.insert("u03".to_string(), 9);
        for (n, size) in (4..=10).zip(1..=7) {
            sizes.insert(format!("u{n:02}"), size);
        }
        let stats = ProfileStats::from_sizes(sizes);
        let top = top_profile_users(&stats, 0.2).unwrap();
        assert_eq!(top.len(), 2);
        assert!(top.contains("u01"));
        assert!(top.contains("u02"));

        let all = top_profile_users(&stats, 1.0).unwrap();
        assert_eq!(all.len(), 10);

        assert!(top_profile_users(&stats, 0.0).is_err());
        assert!(top_profile_users(&stats, 1.5).is_err());
    }

    #[test]
    fn correlation_none_on_constant_ratings() {
        let d = RatingDataset::from_triples(vec![
            ("u1".into(), "i1".into(), 5),
            ("u2".into(), "i1".into(), 5),
            ("u1".into(), "i2".into(), 5),
        ])
        .unwrap();
        assert_eq!(rating_popularity_correlation::<f64>(&d, None), None);
    }

    #[test]
    fn correlation_invariant_under_relabeling() {
        let d = RatingDataset::from_triples(vec![
            ("u1".into(), "i1".into(), 9),
            ("u2".into(), "i1".into(), 8),
            ("u3".into(), "i1".into(), 9),
            ("u1".into(), "i2".into(), 5),
            ("u2".into(), "i2".into(), 4),
            ("u3".into(), "i3".into(), 2),
        ])
        .unwrap();
        let relabeled = RatingDataset::from_triples(
            d.triples()
                .iter()
                .map(|(u, i, r)| (format!("x-{u}"), format!("y-{i}"), *r))
                .collect(),
        )
        .unwrap();
        let a = rating_popularity_correlation::<f64>(&d, None).unwrap();
        let b = rating_popularity_correlation::<f64>(&relabeled, None).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn generator_is_deterministic() {
        let params = LongtailParams {
            num_users: 100,
            num_items: 80,
            num_interactions: 1000,
            exponent: 1.0,
            seed: 42,
        };
        let a = generate_longtail_skeleton(&params).unwrap();
        let b = generate_longtail_skeleton(&params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1000);
        assert_eq!(a.num_users(), 100);
        assert_eq!(a.num_items(), 80);
        assert_eq!(a.item_popularity().total_interactions(), 1000);
    }

    #[test]
    fn generator_rejects_infeasible_parameters() {
        let params = LongtailParams {
            num_users: 10,
            num_items: 10,
            num_interactions: 200,
            exponent: 1.0,
            seed: 1,
        };
        assert!(matches!(
            generate_longtail_skeleton(&params),
            Err(Error::InfeasibleParameters(_))
        ));
        let too_few = LongtailParams {
            num_users: 10,
            num_items: 50,
            num_interactions: 20,
            exponent: 1.0,
            seed: 1,
        };
        assert!(generate_longtail_skeleton(&too_few).is_err());
    }

    #[test]
    fn generator_output_is_long_tailed() {
        let params = LongtailParams {
            num_users: 2000,
            num_items: 1500,
            num_interactions: 50_000,
            exponent: 1.0,
            seed: 7,
        };
        let skeleton = generate_longtail_skeleton(&params).unwrap();
        let pop = skeleton.item_popularity();
        let mut counts: Vec<usize> = pop.counts().values().copied().collect();
        counts.sort_unstable();
        let median = counts[counts.len() / 2];
        let mean = 50_000.0 / counts.len() as f64;
        assert!(
            (median as f64) < mean,
            "median {median} not below mean {mean:.3} for seed 7"
        );
        // Regression values for seed 7.
        assert_eq!(median, 16);
        assert!((mean - 33.333333333333336).abs() < 1e-12);
    }

    #[test]
    fn top_decile_items_hold_large_share() {
        let params = LongtailParams {
            num_users: 1500,
            num_items: 1000,
            num_interactions: 20_000,
            exponent: 1.0,
            seed: 11,
        };
        let skeleton = generate_longtail_skeleton(&params).unwrap();
        let pop = skeleton.item_popularity();
        let mut counts: Vec<usize> = pop.counts().values().copied().collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let top_decile: usize = counts.iter().take(100).sum();
        let share = top_decile as f64 / 20_000.0;
        assert!(share > 0.40, "top decile share {share:.4}");
        // Regression value for seed 11.
        assert_eq!(top_decile, 10_107);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let skel_path = dir.path().join("skeleton.csv");
        let rating_path = dir.path().join("ratings.csv");

        let skeleton = InteractionSkeleton::from_pairs(vec![
            pair("u1", "i1"),
            pair("u2", "i1"),
            pair("u1", "i2"),
        ])
        .unwrap();
        write_skeleton(&skeleton, &skel_path).unwrap();
        assert_eq!(load_interactions(&skel_path).unwrap(), skeleton);

        let dataset = RatingDataset::from_triples(vec![
            ("u1".into(), "i1".into(), 3),
            ("u2".into(), "i1".into(), 10),
        ])
        .unwrap();
        write_ratings(&dataset, &rating_path).unwrap();
        assert_eq!(load_ratings(&rating_path).unwrap(), dataset);

        // Loading a rating file as interactions ignores the rating column.
        assert_eq!(load_interactions(&rating_path).unwrap(), dataset.skeleton());
    }

    #[test]
    fn malformed_lines_are_reported_with_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "user,item\nu1,i1\nu2\n").unwrap();
        match load_interactions(&path).unwrap_err() {
            Error::MalformedLine { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }

        std::fs::write(&path, "user,item,rating\nu1,i1,11\n").unwrap();
        match load_ratings(&path).unwrap_err() {
            Error::RatingOutOfRange { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }

        std::fs::write(&path, "user,item\n").unwrap();
        assert!(matches!(
            load_interactions(&path).unwrap_err(),
            Error::EmptyInput
        ));
    }
}
