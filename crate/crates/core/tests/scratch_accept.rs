use popbias::data::*;
use popbias::synth::*;
use popbias::eval::*;
use popbias::knn::KnnConfig;

#[test]
#[ignore]
fn k_tension_probe() {
    let skeleton = generate_longtail_skeleton(&LongtailParams {
        num_users: 2000, num_items: 1500, num_interactions: 50_000,
        exponent: 1.0, seed: 1,
    }).unwrap();
    let opts = ExperimentOptions { n_folds: 5, holdout_frac: 0.2, top_n: 10, folds_seed: 2024, tune_seed: 7 };
    for k in [150usize, 200, 300, 500] {
        // C4 probe: scenario 4, configs (-1,all,1) and (-1,common,1)
        let s4 = [ScenarioSpec::new(Scenario::BigProfilesLikePopular, 42)];
        let configs = vec![
            ConfigSpec::fixed(KnnConfig::new(-1.0, false, 1, k).unwrap()),
            ConfigSpec::fixed(KnnConfig::new(-1.0, true, 1, k).unwrap()),
        ];
        let r = run_experiment::<f64>(&skeleton, &s4, &configs, &opts).unwrap();
        println!(
            "k={k:>3} S4: all(pc={:.3} pl={:>7.2})  common(pc={:.3} pl={:>7.2})  pc_ok={} pl_ok={}",
            r.rows[0].pop_corr, r.rows[0].pl.unwrap(),
            r.rows[1].pop_corr, r.rows[1].pl.unwrap(),
            r.rows[1].pop_corr < r.rows[0].pop_corr,
            r.rows[1].pl.unwrap() < r.rows[0].pl.unwrap(),
        );
        // C2 probe: scenarios 1,3,5 min_nbrs 1 vs 2 at min_sim -1
        let scen: Vec<ScenarioSpec> = [Scenario::Uniform, Scenario::PopularRatedLower, Scenario::BigProfilesDislikePopular]
            .iter().map(|&s| ScenarioSpec::new(s, 42)).collect();
        let configs2 = vec![
            ConfigSpec::fixed(KnnConfig::new(-1.0, false, 1, k).unwrap()),
            ConfigSpec::fixed(KnnConfig::new(-1.0, false, 2, k).unwrap()),
        ];
        let r2 = run_experiment::<f64>(&skeleton, &scen, &configs2, &opts).unwrap();
        for pair in r2.rows.chunks(2) {
            println!(
                "k={k:>3} s{} min_nbrs 1->2: pc {:.3} -> {:.3}  up={}",
                pair[0].scenario_id, pair[0].pop_corr, pair[1].pop_corr,
                pair[1].pop_corr > pair[0].pop_corr,
            );
        }
    }
}
