mod common;

use common::{max_rel_violation, random_milp};
use stratlearn::milp::{solve_milp, solve_milp_exhaustive, solve_milp_with_stats, BnbConfig};
use stratlearn::model::SolveStatus;

#[test]
fn branch_and_bound_matches_exhaustive_on_random_suite() {
    for seed in 0..50 {
        let inst = random_milp(seed);
        let bnb = solve_milp(&inst, &BnbConfig::default());
        let ex = solve_milp_exhaustive(&inst).unwrap();
        assert_eq!(bnb.status, SolveStatus::Optimal, "seed {seed}");
        assert_eq!(ex.status, SolveStatus::Optimal, "seed {seed}");
        assert!((bnb.objective - ex.objective).abs() <= 1e-6, "seed {seed}: {} vs {}", bnb.objective, ex.objective);
        assert!(max_rel_violation(&inst, &bnb.x) <= 1e-7, "seed {seed}");
        for &j in &inst.integers {
            assert_eq!(bnb.x[j], bnb.x[j].round(), "seed {seed}");
        }
    }
}

#[test]
fn materialized_bounds_agree_with_native_bounds() {
    for seed in 100..120 {
        let inst = random_milp(seed);
        let native = solve_milp(&inst, &BnbConfig::default());
        let rows = solve_milp(&inst.materialize_bounds(), &BnbConfig::default());
        assert!((native.objective - rows.objective).abs() <= 1e-6, "seed {seed}");
    }
}

#[test]
fn node_relaxations_never_exceed_incumbent_and_stay_above_parent() {
    let cfg = BnbConfig { record_bounds: true, ..Default::default() };
    for seed in 200..230 {
        let inst = random_milp(seed);
        let (sol, stats) = solve_milp_with_stats(&inst, &cfg);
        for &(parent, node) in &stats.bound_log {
            assert!(node >= parent - 1e-7, "seed {seed}: child {node} below parent {parent}");
        }
        assert!(stats.root_bound <= sol.objective + 1e-9, "seed {seed}");
    }
}

#[test]
fn solves_are_deterministic() {
    for seed in 300..310 {
        let inst = random_milp(seed);
        let a = solve_milp(&inst, &BnbConfig::default());
        let b = solve_milp(&inst, &BnbConfig::default());
        assert_eq!(a, b);
    }
}
