//! Property tests for the spec-level invariants that benefit from random
//! instances: normalization monotonicity, the min_nbrs filter, prediction
//! convexity under all-positive similarities, and generator coverage.

use std::collections::BTreeMap;

use popbias::data::{
    generate_longtail_skeleton, normalize_popularity, InteractionSkeleton, ItemPopularity,
    LongtailParams, RatingDataset,
};
use popbias::knn::{fit, KnnConfig};
use popbias::synth::{synthesize_ratings, Scenario, ScenarioSpec};
use proptest::prelude::*;

fn counts_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..200, 1..40)
}

fn dataset_strategy() -> impl Strategy<Value = RatingDataset> {
    (2usize..8, 2usize..8, any::<u64>()).prop_map(|(users, items, seed)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut triples = Vec::new();
        for u in 0..users {
            let mut any_rating = false;
            for i in 0..items {
                if rng.random_bool(0.5) {
                    triples.push((
                        format!("u{u}"),
                        format!("i{i}"),
                        rng.random_range(1..=10u8),
                    ));
                    any_rating = true;
                }
            }
            if !any_rating {
                triples.push((
                    format!("u{u}"),
                    format!("i{}", rng.random_range(0..items)),
                    rng.random_range(1..=10u8),
                ));
            }
        }
        RatingDataset::from_triples(triples).unwrap()
    })
}

proptest! {
    #[test]
    fn normalization_is_monotone_and_invert_reflects(counts in counts_strategy()) {
        let map: BTreeMap<String, usize> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (format!("i{i:02}"), c))
            .collect();
        let pop = ItemPopularity::from_counts(map.clone(), 200);
        let normal: BTreeMap<String, f64> = normalize_popularity(&pop, false);
        let inverted: BTreeMap<String, f64> = normalize_popularity(&pop, true);
        for (a, &ca) in &map {
            prop_assert!((1.0..=10.0).contains(&normal[a]));
            prop_assert!((normal[a] + inverted[a] - 11.0).abs() < 1e-12);
            for (b, &cb) in &map {
                if ca >= cb {
                    prop_assert!(normal[a] >= normal[b]);
                    prop_assert!(inverted[a] <= inverted[b]);
                }
            }
        }
    }

    #[test]
    fn raising_min_nbrs_only_shrinks_the_predictable_set(dataset in dataset_strategy()) {
        let lenient = fit(&dataset, KnnConfig::new(-1.0, false, 1, 10).unwrap()).unwrap();
        let strict = fit(&dataset, KnnConfig::new(-1.0, false, 2, 10).unwrap()).unwrap();
        for user in dataset.users() {
            for item in dataset.items() {
                if lenient.profile(user).unwrap().contains(&item) {
                    continue;
                }
                let with_one = lenient.predict(user, item).unwrap();
                let with_two = strict.predict(user, item).unwrap();
                if with_two.is_some() {
                    prop_assert!(
                        with_one.is_some(),
                        "{user}/{item} predictable at min_nbrs 2 but not 1"
                    );
                }
            }
        }
    }

    #[test]
    fn all_positive_neighbourhoods_predict_within_centered_bounds(dataset in dataset_strategy()) {
        let config = KnnConfig::new(0.0, false, 1, 10).unwrap();
        let model = fit(&dataset, config).unwrap();
        let by_pair: BTreeMap<(&String, &String), u8> = dataset
            .triples()
            .iter()
            .map(|(u, i, r)| ((u, i), *r))
            .collect();
        for user in dataset.users() {
            for item in dataset.items() {
                if model.profile(user).unwrap().contains(&item) {
                    continue;
                }
                let neighbours = model.neighbourhood(user, item).unwrap();
                let Some(prediction) = model.predict(user, item).unwrap() else {
                    continue;
                };
                // min_sim = 0 keeps only positive similarities, so the
                // weighted average of centered ratings is convex.
                let centered: Vec<f64> = neighbours
                    .iter()
                    .map(|(v, _)| {
                        by_pair[&(v, item)] as f64 - model.user_mean(v).unwrap()
                    })
                    .collect();
                let lo = centered.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = centered.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let offset = prediction.score - model.user_mean(user).unwrap();
                prop_assert!(
                    offset >= lo - 1e-9 && offset <= hi + 1e-9,
                    "{user}/{item}: offset {offset} outside [{lo}, {hi}]"
                );
            }
        }
    }

    #[test]
    fn generator_covers_every_user_and_item(
        users in 2usize..40,
        items in 2usize..40,
        seed in any::<u64>(),
    ) {
        let interactions = (users.max(items) * 2).min(users * items);
        let params = LongtailParams {
            num_users: users,
            num_items: items,
            num_interactions: interactions,
            exponent: 1.0,
            seed,
        };
        let skeleton = generate_longtail_skeleton(&params).unwrap();
        prop_assert_eq!(skeleton.num_users(), users);
        prop_assert_eq!(skeleton.num_items(), items);
        prop_assert_eq!(skeleton.len(), interactions);
        prop_assert_eq!(skeleton.item_popularity().total_interactions(), interactions);
    }

    #[test]
    fn synthesis_covers_each_interaction_exactly_once(
        seed in any::<u64>(),
        scenario_id in 1u8..=5,
    ) {
        let skeleton = generate_longtail_skeleton(&LongtailParams {
            num_users: 30,
            num_items: 20,
            num_interactions: 150,
            exponent: 1.0,
            seed,
        })
        .unwrap();
        let spec = ScenarioSpec::new(Scenario::from_id(scenario_id).unwrap(), seed);
        let dataset = synthesize_ratings(&skeleton, &spec).unwrap();
        prop_assert_eq!(dataset.len(), skeleton.len());
        prop_assert_eq!(&dataset.skeleton(), &skeleton);
        prop_assert!(dataset.triples().iter().all(|(_, _, r)| (1..=10).contains(r)));
    }
}

#[test]
fn skeleton_construction_is_order_independent() {
    let pairs = vec![
        ("u2".to_string(), "i1".to_string()),
        ("u1".to_string(), "i2".to_string()),
        ("u1".to_string(), "i1".to_string()),
    ];
    let mut reversed = pairs.clone();
    reversed.reverse();
    assert_eq!(
        InteractionSkeleton::from_pairs(pairs).unwrap(),
        InteractionSkeleton::from_pairs(reversed).unwrap()
    );
}
