//! Synthetic rating assignment under the five popularity/rating/user
//! influence scenarios.
//!
//! Every scenario consumes a single ChaCha8 stream in the canonical
//! interaction order (sorted by user then item), so output is bit-identical
//! across runs and platforms for a fixed (skeleton, spec). Scenarios 4 and
//! 5 first draw the uniform base ratings for *all* interactions and then
//! overwrite the top-profile users' ratings in a second pass over the same
//! stream; with equal seeds their non-top-profile ratings are therefore
//! identical to scenario 1's.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::data::{
    normalize_popularity, top_profile_users, InteractionSkeleton, ItemId, RatingDataset,
};
use crate::error::{Error, Result};

/// The five generative rules linking rating value to item popularity and
/// user profile size. Numbering follows the conventional 1..=5 ids used by
/// the CLI and output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// 1: ratings uniform on 1..=10, independent of popularity.
    Uniform,
    /// 2: popular items rated higher (normal around normalized popularity).
    PopularRatedHigher,
    /// 3: popular items rated lower (normal around inverted normalization).
    PopularRatedLower,
    /// 4: only the largest-profile users rate popular items higher
    /// (Poisson around normalized popularity).
    BigProfilesLikePopular,
    /// 5: only the largest-profile users rate popular items lower.
    BigProfilesDislikePopular,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Uniform,
        Scenario::PopularRatedHigher,
        Scenario::PopularRatedLower,
        Scenario::BigProfilesLikePopular,
        Scenario::BigProfilesDislikePopular,
    ];

    pub fn id(self) -> u8 {
        match self {
            Scenario::Uniform => 1,
            Scenario::PopularRatedHigher => 2,
            Scenario::PopularRatedLower => 3,
            Scenario::BigProfilesLikePopular => 4,
            Scenario::BigProfilesDislikePopular => 5,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|s| s.id() == id)
            .ok_or_else(|| Error::InvalidParameter(format!("scenario id {id} outside 1..=5")))
    }
}

/// Full specification of one synthesis run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    /// Standard deviation of the normal draws (scenarios 2 and 3).
    pub sigma: f64,
    /// Share of users counted as "big profiles" (scenarios 4 and 5).
    pub profile_fraction: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Spec with the default sigma (1.0) and profile fraction (0.2).
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        Self {
            scenario,
            sigma: 1.0,
            profile_fraction: 0.2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma {} must be positive and finite",
                self.sigma
            )));
        }
        if !(self.profile_fraction > 0.0 && self.profile_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "profile fraction {} outside (0, 1]",
                self.profile_fraction
            )));
        }
        Ok(())
    }
}

/// Assigns one rating per skeleton interaction according to `spec`.
pub fn synthesize_ratings(
    skeleton: &InteractionSkeleton,
    spec: &ScenarioSpec,
) -> Result<RatingDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let ratings = match spec.scenario {
        Scenario::Uniform => uniform_pass(skeleton, &mut rng),
        Scenario::PopularRatedHigher => normal_pass(skeleton, spec.sigma, false, &mut rng),
        Scenario::PopularRatedLower => normal_pass(skeleton, spec.sigma, true, &mut rng),
        Scenario::BigProfilesLikePopular => {
            poisson_replacement(skeleton, spec.profile_fraction, false, &mut rng)?
        }
        Scenario::BigProfilesDislikePopular => {
            poisson_replacement(skeleton, spec.profile_fraction, true, &mut rng)?
        }
    };

    let triples = skeleton
        .interactions()
        .iter()
        .zip(ratings)
        .map(|((u, i), r)| (u.clone(), i.clone(), r))
        .collect();
    RatingDataset::from_triples(triples)
}

fn uniform_pass(skeleton: &InteractionSkeleton, rng: &mut ChaCha8Rng) -> Vec<u8> {
    skeleton
        .interactions()
        .iter()
        .map(|_| rng.random_range(1..=10u8))
        .collect()
}

fn normal_pass(
    skeleton: &InteractionSkeleton,
    sigma: f64,
    invert: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<u8> {
    let means: BTreeMap<ItemId, f64> = normalize_popularity(&skeleton.item_popularity(), invert);
    skeleton
        .interactions()
        .iter()
        .map(|(_, item)| {
            let normal = Normal::new(means[item], sigma).expect("validated sigma");
            round_clamp(normal.sample(rng))
        })
        .collect()
}

fn poisson_replacement(
    skeleton: &InteractionSkeleton,
    profile_fraction: f64,
    invert: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u8>> {
    let mut ratings = uniform_pass(skeleton, rng);
    let lambdas: BTreeMap<ItemId, f64> = normalize_popularity(&skeleton.item_popularity(), invert);
    let top = top_profile_users(&skeleton.profile_stats(), profile_fraction)?;
    for (idx, (user, item)) in skeleton.interactions().iter().enumerate() {
        if !top.contains(user) {
            continue;
        }
        let poisson = Poisson::new(lambdas[item]).expect("normalized popularity is positive");
        let draw: f64 = poisson.sample(rng);
        // A Poisson draw of 0 maps to the scale minimum.
        ratings[idx] = draw.clamp(1.0, 10.0) as u8;
    }
    Ok(ratings)
}

fn round_clamp(x: f64) -> u8 {
    (x.round().clamp(1.0, 10.0)) as u8
}
