use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stratlearn::datagen::{fill_reward_table, generate_dataset, DatagenConfig, Dataset};
use stratlearn::families::{build_fuel_cell_family, build_inventory_family, FuelCellParams, InventoryParams};
use stratlearn::inference::{evaluate, evaluate_with, Metrics, DEFAULT_K};
use stratlearn::learner::{train, TrainConfig, TrainingSet};
use stratlearn::model::StrategyLibrary;
use stratlearn::pruning::{build_bipartite, greedy_set_cover};

const EPS: f64 = 1e-4;

struct Fixture {
    train: Dataset,
    test: Dataset,
    pruned: StrategyLibrary,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let fam = build_fuel_cell_family(&FuelCellParams::with_horizon(4), 0.25).unwrap();
        let mut train = generate_dataset(&fam, &DatagenConfig { min_n: 120, max_n: 120, ..Default::default() }).unwrap();
        let test = generate_dataset(&fam, &DatagenConfig { min_n: 40, max_n: 40, base_seed: 500_000, ..Default::default() }).unwrap();
        fill_reward_table(&mut train, None, None).unwrap();
        let g = build_bipartite(&train, EPS, EPS).unwrap();
        let pruned = greedy_set_cover(&g, &train.library).unwrap();
        Fixture { train, test, pruned }
    })
}

fn random_predictor(seed: u64, m: usize) -> impl Fn(usize, &[f64]) -> Vec<f64> + Sync {
    move |i, _| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()
    }
}

fn quality(m: &Metrics) -> Vec<(usize, bool)> {
    m.instances.iter().map(|o| (o.selected, o.accurate)).collect()
}

#[test]
fn oracle_predictor_reaches_full_accuracy_on_covered_instances() {
    let fx = fixture();
    let table = fx.train.reward_table.as_ref().unwrap();
    let sources = fx.pruned.source_indices().unwrap().to_vec();
    let truth = |i: usize| sources.iter().map(|&j| table.reward(i, j)).collect::<Vec<f64>>();
    let ev = evaluate_with(&fx.train, &fx.pruned, 1, EPS, EPS, |i, _| truth(i)).unwrap();

    let expected = (0..fx.train.len())
        .filter(|&i| {
            let r = truth(i);
            let best = (0..r.len()).fold(0, |b, j| if r[j] > r[b] { j } else { b });
            table.get(i, sources[best]).unwrap().within(EPS, EPS)
        })
        .count() as f64
        / fx.train.len() as f64;
    assert_eq!(ev.metrics.accuracy, expected);
    assert_eq!(ev.metrics.accuracy, 1.0);
}

#[test]
fn full_candidate_set_is_model_independent() {
    let fx = fixture();
    let mp = fx.pruned.len();
    let a = evaluate_with(&fx.test, &fx.pruned, mp, EPS, EPS, random_predictor(1, mp)).unwrap();
    let b = evaluate_with(&fx.test, &fx.pruned, mp, EPS, EPS, random_predictor(2, mp)).unwrap();
    assert_eq!(quality(&a.metrics), quality(&b.metrics));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn accuracy_is_monotone_in_k(seed in any::<u64>(), a in 1usize..=10, b in 1usize..=10) {
        let fx = fixture();
        let mp = fx.pruned.len();
        let (lo, hi) = (a.min(b).min(mp), a.max(b).min(mp));
        let acc = |k| evaluate_with(&fx.test, &fx.pruned, k, EPS, EPS, random_predictor(seed, mp)).unwrap().metrics.accuracy;
        prop_assert!(acc(lo) <= acc(hi));
    }

    #[test]
    fn constant_shift_leaves_selection_unchanged(seed in any::<u64>(), shift in -50.0f64..50.0, k in 1usize..=4) {
        let fx = fixture();
        let mp = fx.pruned.len();
        let k = k.min(mp);
        let base = random_predictor(seed, mp);
        let a = evaluate_with(&fx.test, &fx.pruned, k, EPS, EPS, &base).unwrap();
        let b = evaluate_with(&fx.test, &fx.pruned, k, EPS, EPS, |i, t| base(i, t).into_iter().map(|v| v + shift).collect()).unwrap();
        prop_assert_eq!(quality(&a.metrics), quality(&b.metrics));
    }
}

#[test]
fn inventory_end_to_end_reaches_most_of_the_ceiling() {
    let fam = build_inventory_family(&InventoryParams::default(), 0.1).unwrap();
    let mut train_ds = generate_dataset(&fam, &DatagenConfig { min_n: 200, max_n: 200, ..Default::default() }).unwrap();
    let test_ds = generate_dataset(&fam, &DatagenConfig { min_n: 60, max_n: 60, base_seed: 1_000_000, ..Default::default() }).unwrap();
    fill_reward_table(&mut train_ds, None, None).unwrap();
    let g = build_bipartite(&train_ds, EPS, EPS).unwrap();
    let pruned = greedy_set_cover(&g, &train_ds.library).unwrap();
    let set = TrainingSet::from_dataset(&train_ds, &pruned).unwrap();
    let (model, report) = train(&set, &TrainConfig { epochs: 40, ..Default::default() }).unwrap();
    assert!(report.loss_trace.iter().all(|l| l.is_finite()));

    let mp = pruned.len();
    let ceiling = evaluate(&model, &test_ds, &pruned, mp, EPS, EPS).unwrap().metrics.accuracy;
    let acc = evaluate(&model, &test_ds, &pruned, DEFAULT_K.min(mp), EPS, EPS).unwrap().metrics.accuracy;
    assert!(acc >= 0.8 * ceiling, "accuracy {acc} vs ceiling {ceiling} (M_P = {mp})");
}
