use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratlearn::lp::{solve_lp, tight_set, LpResultStatus, EPS_TIGHT};
use stratlearn::model::{Bound, DenseMatrix, MilpInstance, RowSense};

/// Random LP in `[0, 10]^n` with bounds written as rows and quarter-integer data.
fn random_lp(seed: u64) -> MilpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=5);
    let k = rng.random_range(1..=(12 - 2 * n).max(1));
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0..=40) as f64 / 4.0).collect();
    let mut a = DenseMatrix::zeros(0, n);
    let mut b = Vec::new();
    for _ in 0..k {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-12..=12) as f64 / 4.0).collect();
        let act: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
        b.push(act + rng.random_range(0..=8) as f64 / 4.0);
        a.push_row(&row);
    }
    let c = (0..n).map(|_| rng.random_range(-20..=20) as f64 / 4.0).collect();
    MilpInstance {
        name: format!("lp{seed}"),
        c,
        a,
        row_sense: vec![RowSense::Le; k],
        b,
        integers: vec![],
        bounds: vec![Bound::new(0.0, 10.0); n],
    }
    .materialize_bounds()
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Best objective over all feasible basic solutions.
fn vertex_enumeration(inst: &MilpInstance) -> f64 {
    let n = inst.n();
    let mut best = f64::INFINITY;
    for rows in combinations(inst.m(), n) {
        let a = rows.iter().map(|&i| inst.a.row(i).to_vec()).collect();
        let b = rows.iter().map(|&i| inst.b[i]).collect();
        let Some(x) = solve_square(a, b) else { continue };
        let act = inst.row_activity(&x);
        if (0..inst.m()).all(|i| act[i] <= inst.b[i] + 1e-9 * (1.0 + inst.b[i].abs())) {
            best = best.min(inst.objective(&x));
        }
    }
    best
}

#[test]
fn simplex_matches_vertex_enumeration() {
    for seed in 0..50 {
        let inst = random_lp(seed);
        let r = solve_lp(&inst);
        assert_eq!(r.status, LpResultStatus::Optimal, "seed {seed}");
        let oracle = vertex_enumeration(&inst);
        assert!((r.objective - oracle).abs() <= 1e-8, "seed {seed}: {} vs {oracle}", r.objective);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_point_is_feasible_and_deterministic(seed in any::<u64>()) {
        let inst = random_lp(seed);
        let r = solve_lp(&inst);
        prop_assert_eq!(r.status, LpResultStatus::Optimal);
        for i in 0..inst.m() {
            prop_assert!(r.row_activity[i] <= inst.b[i] + 1e-7 * (1.0 + inst.b[i].abs()));
        }
        prop_assert_eq!(&solve_lp(&inst), &r);
    }

    #[test]
    fn tight_rows_alone_reproduce_objective(seed in any::<u64>()) {
        let inst = random_lp(seed);
        let r = solve_lp(&inst);
        let t = tight_set(&inst, &r.x, EPS_TIGHT);
        prop_assert!(t.len() >= inst.n());
        let mut reduced = inst.clone();
        reduced.a = DenseMatrix::from_rows(&t.iter().map(|&i| inst.a.row(i).to_vec()).collect::<Vec<_>>());
        reduced.b = t.iter().map(|&i| inst.b[i]).collect();
        reduced.row_sense = vec![RowSense::Le; t.len()];
        let rr = solve_lp(&reduced);
        prop_assert_eq!(rr.status, LpResultStatus::Optimal);
        prop_assert!((rr.objective - r.objective).abs() <= 1e-8 * (1.0 + r.objective.abs()));
    }
}
